"""The ``PGEC1`` checkpoint container and model (de)serialization.

Layout: the 5-byte magic ``PGEC1``, a little-endian uint64 header length,
a UTF-8 JSON header (sorted keys, compact separators), then raw
little-endian float64 blobs in the order the header lists them. Each blob
entry records its name, shape, byte offset (from the end of the header) and
element count. Writing is canonical, so write -> read -> write is
byte-identical.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from . import nn
from .encoders import Encoder, EncoderConfig
from .tasks import TaskModel, TrainConfig, TrainState, class_names

MAGIC = b"PGEC1"
_LEN = struct.Struct("<Q")


class CheckpointError(ValueError):
    pass


def encode_checkpoint(header: dict, blobs: dict) -> bytes:
    entries = []
    chunks = []
    offset = 0
    for name, arr in blobs.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset, "count": int(a.size)})
        chunks.append(a.tobytes())
        offset += a.nbytes
    meta = dict(header)
    meta["blobs"] = entries
    text = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + _LEN.pack(len(text)) + text + b"".join(chunks)


def decode_checkpoint(data: bytes) -> tuple[dict, dict]:
    if data[:5] != MAGIC:
        raise CheckpointError("not a PGEC1 checkpoint (bad magic)")
    if len(data) < 13:
        raise CheckpointError("truncated checkpoint header")
    (n,) = _LEN.unpack_from(data, 5)
    start = 13 + n
    if start > len(data):
        raise CheckpointError("truncated checkpoint header")
    try:
        header = json.loads(data[13:start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc
    blobs = {}
    body = memoryview(data)[start:]
    expected = 0
    for e in header.pop("blobs", []):
        count = int(np.prod(e["shape"], dtype=np.int64)) if e["shape"] else 1
        if count != e["count"] or e["offset"] != expected:
            raise CheckpointError(f"blob {e['name']!r}: header shape/offset disagree")
        end = e["offset"] + 8 * count
        if end > len(body):
            raise CheckpointError(f"blob {e['name']!r} runs past end of file")
        arr = np.frombuffer(body[e["offset"]:end], dtype="<f8").astype(np.float64)
        blobs[e["name"]] = arr.reshape(e["shape"])
        expected = end
    if expected != len(body):
        raise CheckpointError("trailing bytes after the last blob")
    return header, blobs


def write_checkpoint(path, header: dict, blobs: dict) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_checkpoint(header, blobs))


def read_checkpoint(path) -> tuple[dict, dict]:
    with open(path, "rb") as fh:
        return decode_checkpoint(fh.read())


# ---------------------------------------------------------------------------
# models

def model_blobs(model: TaskModel, state: TrainState | None) -> dict:
    blobs = {f"model/{k}": v for k, v in model.state_dict().items()}
    if state is not None:
        if state.best_state is not None:
            blobs.update({f"best/{k}": v for k, v in state.best_state.items()})
        for k in sorted(state.adam.m):
            blobs[f"adam_m/{k}"] = state.adam.m[k]
            blobs[f"adam_v/{k}"] = state.adam.v[k]
    return blobs


def save_model(path, model: TaskModel, tcfg: TrainConfig, state: TrainState | None = None,
               metrics: dict | None = None) -> None:
    header = {
        "format": 1,
        "task": model.task,
        "encoder": model.encoder.cfg.to_dict(),
        "train": tcfg.to_dict(),
        "metrics": metrics or {},
    }
    if state is not None:
        a = state.adam
        header["state"] = {
            "epoch": state.epoch, "best_epoch": state.best_epoch, "best_valid": state.best_valid,
            "history": state.history,
            "adam": {"beta1": a.beta1, "beta2": a.beta2, "eps": a.eps, "step": a.step},
        }
    write_checkpoint(path, header, model_blobs(model, state))


def _section(blobs: dict, prefix: str) -> dict:
    return {k[len(prefix):]: v for k, v in blobs.items() if k.startswith(prefix)}


def load_model(path, weights: str = "best"):
    """Rebuild ``(model, train_config, train_state, header)`` from a checkpoint.

    ``weights="best"`` loads the best-validation weights when present,
    ``"last"`` the most recent ones (used for resuming).
    """
    header, blobs = read_checkpoint(path)
    try:
        cfg = EncoderConfig.from_dict(header["encoder"])
        tcfg = TrainConfig.from_dict(header["train"])
        task = header["task"]
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"checkpoint header missing {exc}") from exc
    current = _section(blobs, "model/")
    best = _section(blobs, "best/")
    chosen = best if weights == "best" and best else current
    encoder = Encoder(cfg)
    encoder.prep.load_arrays(chosen, "buffer/encoder.prep.")
    encoder.build(np.random.default_rng(0))
    model = TaskModel(encoder, task, len(class_names(task)), tcfg, np.random.default_rng(0))
    try:
        model.load_state_dict(chosen)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"checkpoint weights do not fit the declared model: {exc}") from exc
    state = None
    if "state" in header:
        s = header["state"]
        adam = nn.AdamState(s["adam"]["beta1"], s["adam"]["beta2"], s["adam"]["eps"], s["adam"]["step"],
                            {k: v.copy() for k, v in _section(blobs, "adam_m/").items()},
                            {k: v.copy() for k, v in _section(blobs, "adam_v/").items()})
        state = TrainState(s["epoch"], s["best_epoch"], s["best_valid"],
                           {k: v.copy() for k, v in best.items()} or None, adam, s["history"])
    return model, tcfg, state, header
