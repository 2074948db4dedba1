"""``polyenc`` command line: gen, train, eval, propcheck, encode.

Every failure prints one line ``error[CODE]: message`` to stderr and exits
1 for user errors or 2 for internal errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields

import numpy as np

from . import datagen
from .checkpoint import CheckpointError, load_model, save_model
from .encoders import ENCODER_KINDS, EncoderConfig
from .geometry import GeometryError
from .propcheck import corpus, embedding_suite, untrained_encoder
from .tasks import (
    RELATIONS, RELATIONS_TASK, SHAPES, TrainConfig, TrainingDiverged, build_model, class_names,
    evaluate, model_inputs, relation_groupers, relation_raw, shape_groupers, shape_raw, train,
)

CONFIG_VERSION = 1
ENCODER_KEYS = {f.name for f in fields(EncoderConfig)} - {"kind"}
TRAIN_KEYS = {f.name for f in fields(TrainConfig)}
TOP_KEYS = {"version", "task", "encoder"}


class UserError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# config

def parse_config(doc: dict) -> tuple[str, EncoderConfig, TrainConfig]:
    """Validate a flat config document; every offending key is listed."""
    if not isinstance(doc, dict):
        raise UserError("E_CONFIG", "config must be a JSON object")
    problems = []
    unknown = sorted(set(doc) - TOP_KEYS - ENCODER_KEYS - TRAIN_KEYS)
    if unknown:
        problems.append(f"unknown keys {unknown}")
    if doc.get("version") != CONFIG_VERSION:
        problems.append(f"version must be {CONFIG_VERSION}")
    task = doc.get("task", SHAPES)
    if task not in (SHAPES, RELATIONS_TASK):
        problems.append(f"task must be {SHAPES!r} or {RELATIONS_TASK!r}")
    if doc.get("encoder") not in ENCODER_KINDS:
        problems.append(f"encoder must be one of {list(ENCODER_KINDS)}")
    if problems:
        raise UserError("E_CONFIG", "; ".join(problems))
    try:
        enc = EncoderConfig(kind=doc["encoder"], **{k: doc[k] for k in ENCODER_KEYS if k in doc})
        tcfg = TrainConfig(**{k: doc[k] for k in TRAIN_KEYS if k in doc})
    except (TypeError, ValueError) as exc:
        raise UserError("E_CONFIG", str(exc)) from exc
    return task, enc, tcfg


def load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise UserError("E_IO", f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UserError("E_CONFIG", f"{path} is not valid JSON: {exc}") from exc


def load_dataset(path: str) -> list:
    try:
        data = datagen.read_ndjson(path)
    except OSError as exc:
        raise UserError("E_IO", f"cannot read {path}: {exc.strerror}") from exc
    except ValueError as exc:
        raise UserError("E_DATA", str(exc)) from exc
    if not data:
        raise UserError("E_DATA", f"{path} holds no samples")
    return data


def dataset_task(data: list) -> str:
    return SHAPES if isinstance(data[0], datagen.ShapeSample) else RELATIONS_TASK


def _check_task(task: str, data: list, path: str) -> None:
    if dataset_task(data) != task:
        raise UserError("E_MISMATCH", f"{path} is a {dataset_task(data)} dataset but the model is for {task}")


def labels_of(data: list) -> np.ndarray:
    if isinstance(data[0], datagen.ShapeSample):
        y = np.array([s.label for s in data])
        if y.min() < 0 or y.max() >= len(datagen.SHAPE_CLASSES):
            raise UserError("E_DATA", "shape label out of range")
        return y
    try:
        return np.array([RELATIONS.index(s.relation) for s in data])
    except ValueError as exc:
        raise UserError("E_DATA", f"unknown relation: {exc}") from exc


def raw_features(encoder, data: list) -> np.ndarray:
    if isinstance(data[0], datagen.ShapeSample):
        return shape_raw(encoder, [s.geom for s in data])
    return relation_raw(encoder, [(s.subject, s.object) for s in data])


def groupers_of(data: list) -> dict:
    if isinstance(data[0], datagen.ShapeSample):
        return shape_groupers([s.geom for s in data])
    return relation_groupers([(s.subject, s.object) for s in data])


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise UserError("E_IO", f"cannot write {path}: {exc.strerror}") from exc


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# commands

def cmd_gen(args) -> int:
    if args.task == "shapes":
        samples = datagen.gen_shape_dataset(args.n, args.vertex_budget, args.seed)
    else:
        samples = datagen.gen_relation_dataset(args.n, args.sliver_fraction, args.vertex_budget, args.seed)
    try:
        datagen.write_ndjson(samples, args.out)
    except OSError as exc:
        raise UserError("E_IO", f"cannot write {args.out}: {exc.strerror}") from exc
    return 0


def _apply_overrides(tcfg: TrainConfig, args) -> TrainConfig:
    d = tcfg.to_dict()
    for key in ("epochs", "seed", "lr", "batch_size"):
        val = getattr(args, key, None)
        if val is not None:
            d[key] = val
    try:
        return TrainConfig(**d)
    except ValueError as exc:
        raise UserError("E_CONFIG", str(exc)) from exc


def cmd_train(args) -> int:
    data = load_dataset(args.data)
    if args.valid:
        valid = load_dataset(args.valid)
    else:
        # hold out every tenth sample for model selection
        valid = data[9::10]
        data = [s for i, s in enumerate(data) if i % 10 != 9]
    if args.resume:
        model, tcfg, state, header = _load(args.resume, weights="last")
        if state is None:
            raise UserError("E_CHECKPOINT", f"{args.resume} has no training state to resume")
        tcfg = _apply_overrides(tcfg, args)
        task = model.task
    else:
        task, enc_cfg, tcfg = parse_config(load_json(args.config))
        tcfg = _apply_overrides(tcfg, args)
        model = None
        state = None
    _check_task(task, data, args.data)
    _check_task(task, valid, args.valid or args.data)
    if model is None:
        from .encoders import Encoder
        raw_train = raw_features(Encoder(enc_cfg), data)
        model = build_model(enc_cfg, tcfg, task, raw_train)
    else:
        raw_train = raw_features(model.encoder, data)
    arity = model.arity
    x_tr = model_inputs(model.encoder, raw_train, arity)
    x_va = model_inputs(model.encoder, raw_features(model.encoder, valid), arity)
    y_tr, y_va = labels_of(data), labels_of(valid)

    def checkpoint(st):
        save_model(args.out, model, tcfg, st, metrics={"best_valid_acc": st.best_valid})

    try:
        state = train(model, x_tr, y_tr, x_va, y_va, tcfg, state, on_epoch=checkpoint)
    except TrainingDiverged as exc:
        raise UserError("E_DIVERGED", str(exc)) from exc
    checkpoint(state)
    history_path = args.history or os.path.splitext(args.out)[0] + ".history.json"
    _write_text(history_path, _dumps({"history": state.history, "best_epoch": state.best_epoch,
                                      "best_valid_acc": state.best_valid}))
    return 0


def _load(path: str, weights: str = "best"):
    try:
        return load_model(path, weights)
    except OSError as exc:
        raise UserError("E_IO", f"cannot read {path}: {exc.strerror}") from exc
    except CheckpointError as exc:
        raise UserError("E_CHECKPOINT", str(exc)) from exc


def cmd_eval(args) -> int:
    model, _, _, header = _load(args.checkpoint)
    data = load_dataset(args.data)
    _check_task(model.task, data, args.data)
    x = model_inputs(model.encoder, raw_features(model.encoder, data), model.arity)
    pred = model.predict_proba(x).argmax(axis=1)
    report = evaluate(pred, labels_of(data), class_names(model.task), groupers_of(data))
    out = report.to_dict()
    out.update(task=model.task, encoder=model.encoder.kind)
    _write_text(args.out, _dumps(out))
    if args.confusion:
        names = list(report.classes)
        rows = [",".join(["true\\pred"] + names)]
        rows += [",".join([names[i]] + [str(c) for c in row]) for i, row in enumerate(report.confusion)]
        _write_text(args.confusion, "\n".join(rows) + "\n")
    return 0


def cmd_propcheck(args) -> int:
    geoms = corpus(args.n, args.seed, args.vertex_budget)
    if args.checkpoint:
        model, _, _, _ = _load(args.checkpoint)
        encoder = model.encoder
    else:
        if not args.config:
            raise UserError("E_USAGE", "propcheck needs --config or --checkpoint")
        _, enc_cfg, tcfg = parse_config(load_json(args.config))
        encoder = untrained_encoder(enc_cfg, geoms, tcfg.seed)
    report = embedding_suite(encoder, geoms, args.seed)
    text = _dumps(report)
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_encode(args) -> int:
    model, _, _, _ = _load(args.checkpoint)
    data = load_dataset(args.data)
    _check_task(model.task, data, args.data)
    x = model_inputs(model.encoder, raw_features(model.encoder, data), model.arity)
    lines = []
    for i, s in enumerate(data):
        if model.arity == 1:
            emb = model.encoder.forward(x[i:i + 1])[0]
        else:
            emb = model.encoder.forward(x[i])  # subject row then object row
            emb = np.concatenate([emb[0], emb[1]])
        if not np.all(np.isfinite(emb)):
            raise RuntimeError(f"non-finite embedding for {s.id}")
        lines.append(json.dumps({"id": s.id, "embedding": [float(v) for v in emb]},
                                separators=(",", ":")))
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


# ---------------------------------------------------------------------------

class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Reports usage errors as one ``E_USAGE`` line instead of argparse's usage dump."""

    def error(self, message):
        raise _UsageError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="polyenc", description="Polygon encoders: data, training, evaluation.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset as NDJSON")
    g.add_argument("--task", choices=("shapes", "relations"), required=True)
    g.add_argument("--n", type=int, required=True, help="samples per class / relation")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--sliver-fraction", type=float, default=0.0)
    g.add_argument("--vertex-budget", type=int, default=datagen.DEFAULT_BUDGET)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train an encoder and task head")
    t.add_argument("--config", help="flat JSON config (required unless --resume)")
    t.add_argument("--data", required=True)
    t.add_argument("--valid", help="validation NDJSON (default: every tenth training sample)")
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--history", help="history JSON path (default: checkpoint path with its extension replaced by .history.json)")
    t.add_argument("--resume", help="continue from this checkpoint's training state")
    t.add_argument("--epochs", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--batch-size", type=int)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--confusion", help="optional confusion-matrix CSV path")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("propcheck", help="run the Loop/TriV/ParP/Topo suites")
    c.add_argument("--config")
    c.add_argument("--checkpoint")
    c.add_argument("--n", type=int, default=50)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--vertex-budget", type=int, default=64)
    c.add_argument("--out")
    c.set_defaults(func=cmd_propcheck)

    n = sub.add_parser("encode", help="write per-sample embeddings as NDJSON")
    n.add_argument("--checkpoint", required=True)
    n.add_argument("--data", required=True)
    n.add_argument("--out", required=True)
    n.set_defaults(func=cmd_encode)
    return p


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error[E_USAGE]: {' '.join(str(exc).split())} (see --help)", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    try:
        if args.command == "train" and not (args.config or args.resume):
            raise UserError("E_USAGE", "train needs --config or --resume")
        return args.func(args)
    except UserError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except (GeometryError, ValueError) as exc:
        print(f"error[E_INPUT]: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort reporting
        print(f"error[E_INTERNAL]: {type(exc).__name__}: {' '.join(str(exc).split())}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
