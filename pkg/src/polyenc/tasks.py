"""Shape-classification and spatial-relation heads, the deterministic relation
baseline, the training loop and grouped evaluation."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import kernels, nn
from .encoders import Encoder, EncoderConfig, SPECTRAL_KINDS
from .geometry import GeometryError, PolyGeom, centroid, geometry_area, normalize_unit, points_in_geometry

RELATIONS = ("isPartOf", "north", "east", "south", "west",
             "northwest", "northeast", "southwest", "southeast")
SECTORS = ("east", "northeast", "north", "northwest", "west", "southwest", "south", "southeast")

SHAPES = "shapes"
RELATIONS_TASK = "relations"

PART_GROUPS = ("1", "2", "3", "4", "5", "6+")
AREA_BINS = ((0.0, 0.1), (0.1, 0.2), (0.2, 0.3), (0.3, 1.0), (1.0, 1.1), (1.1, 1.2), (1.2, math.inf))


class UnclassifiablePair(GeometryError):
    """Subject and object centroids coincide and the subject is not contained."""


class TrainingDiverged(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# deterministic baseline

def sector_of(bearing_deg: float) -> str:
    """45-degree sector whose half-open span ``[c - 22.5, c + 22.5)`` holds the bearing."""
    return SECTORS[int(((bearing_deg + 22.5) % 360.0) // 45.0) % 8]


def contains(sub: PolyGeom, obj: PolyGeom) -> bool:
    """Every subject vertex inside the object (boundary counts) and no boundary crossing."""
    if not points_in_geometry(sub.vertices(), obj).all():
        return False
    return not any(kernels.rings_cross(a, b) for _, _, a in sub.rings() for _, _, b in obj.rings())


def deterministic_relation(sub: PolyGeom, obj: PolyGeom) -> str:
    if contains(sub, obj):
        return "isPartOf"
    dx, dy = centroid(sub) - centroid(obj)
    if dx == 0 and dy == 0:
        raise UnclassifiablePair("coincident centroids for a non-contained pair")
    return sector_of(math.degrees(math.atan2(dy, dx)) % 360.0)


# ---------------------------------------------------------------------------
# model

@dataclass
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    optimizer: str = "adam"
    head_layers: int = 1
    head_hidden: int = 64

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be at least 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.head_layers < 0 or self.head_hidden < 1:
            raise ValueError("bad head shape")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = sorted(set(d) - {f.name for f in fields(cls)})
        if unknown:
            raise ValueError(f"unknown training keys: {unknown}")
        return cls(**d)


class TaskModel(nn.Module):
    """Encoder plus MLP head. Relation models encode subject and object with
    the shared encoder and classify their concatenation."""

    def __init__(self, encoder: Encoder, task: str, n_classes: int, tcfg: TrainConfig,
                 rng: np.random.Generator):
        super().__init__()
        self.task = task
        self.arity = 2 if task == RELATIONS_TASK else 1
        self.n_classes = n_classes
        self.encoder = self.add("encoder", encoder)
        self.head = self.add("head", nn.mlp(encoder.cfg.d * self.arity, tcfg.head_hidden,
                                            n_classes, tcfg.head_layers, rng))

    def forward(self, x, train=False, rng=None):
        if self.arity == 1:
            return self.head.forward(self.encoder.forward(x, train, rng), train, rng)
        b = len(x)
        e = self.encoder.forward(np.concatenate([x[:, 0], x[:, 1]]), train, rng)
        self._b = b
        return self.head.forward(np.concatenate([e[:b], e[b:]], axis=1), train, rng)

    def backward(self, dy):
        dz = self.head.backward(dy)
        if self.arity == 1:
            return self.encoder.backward(dz)
        d = dz.shape[1] // 2
        return self.encoder.backward(np.concatenate([dz[:, :d], dz[:, d:]]))

    def predict_proba(self, x, chunk: int = 256) -> np.ndarray:
        out = [nn.softmax(self.forward(x[i:i + chunk])) for i in range(0, len(x), chunk)]
        return np.concatenate(out) if out else np.zeros((0, self.n_classes))


def class_names(task: str) -> tuple:
    from .datagen import SHAPE_CLASSES
    return SHAPE_CLASSES if task == SHAPES else RELATIONS


# ---------------------------------------------------------------------------
# features

def shape_raw(encoder: Encoder, geoms) -> np.ndarray:
    return encoder.featurize_many([encoder.normalize(g) for g in geoms])


def relation_raw(encoder: Encoder, pairs) -> np.ndarray:
    """Jointly normalized ``(N, 2, ...)`` features for (subject, object) pairs."""
    flat = []
    for sub, obj in pairs:
        (ns, no), _ = normalize_unit([sub, obj], encoder.cfg.normalization)
        flat += [ns, no]
    raw = encoder.featurize_many(flat)
    return raw.reshape(len(pairs), 2, *raw.shape[1:])


def fit_preprocess(encoder: Encoder, raw: np.ndarray, arity: int) -> None:
    if encoder.kind in SPECTRAL_KINDS:
        encoder.fit(raw.reshape(-1, raw.shape[-1]) if arity == 2 else raw)


def model_inputs(encoder: Encoder, raw: np.ndarray, arity: int) -> np.ndarray:
    if arity == 1:
        return encoder.preprocess(raw)
    x = encoder.preprocess(raw.reshape(-1, *raw.shape[2:]))
    return x.reshape(len(raw), 2, *x.shape[1:])


def build_model(enc_cfg: EncoderConfig, tcfg: TrainConfig, task: str, raw_train) -> TaskModel:
    """Fit preprocessing on the training features and initialize all weights from ``tcfg.seed``."""
    encoder = Encoder(enc_cfg)
    arity = 2 if task == RELATIONS_TASK else 1
    if raw_train is not None:
        fit_preprocess(encoder, raw_train, arity)
    rng = np.random.default_rng([tcfg.seed, 1])
    encoder.build(rng)
    return TaskModel(encoder, task, len(class_names(task)), tcfg, rng)


def shape_classify(g: PolyGeom, model: TaskModel) -> np.ndarray:
    x = model_inputs(model.encoder, shape_raw(model.encoder, [g]), 1)
    return model.predict_proba(x)[0]


def relation_predict(sub: PolyGeom, obj: PolyGeom, model: TaskModel) -> np.ndarray:
    x = model_inputs(model.encoder, relation_raw(model.encoder, [(sub, obj)]), 2)
    return model.predict_proba(x)[0]


# ---------------------------------------------------------------------------
# training

@dataclass
class TrainState:
    """Everything needed to resume training bit-identically."""

    epoch: int = 0
    best_epoch: int = -1
    best_valid: float = -1.0
    best_state: dict | None = None
    adam: nn.AdamState = field(default_factory=nn.AdamState)
    history: list = field(default_factory=list)


def _params(model: nn.Module):
    return dict(model.named_parameters()), dict(model.named_grads())


def accuracy(model: TaskModel, x, y) -> float:
    if len(y) == 0:
        return float("nan")
    return float(np.mean(model.predict_proba(x).argmax(axis=1) == y))


def train(model: TaskModel, x_train, y_train, x_valid, y_valid, tcfg: TrainConfig,
          state: TrainState | None = None, on_epoch=None) -> TrainState:
    """Mini-batch training; records per-epoch loss/accuracy and keeps the
    best-validation weights. Each epoch's shuffle and dropout stream come from
    ``default_rng([seed, epoch])`` so resuming mid-run reproduces a full run."""
    y_train = np.asarray(y_train)
    if len(y_train) == 0:
        raise ValueError("empty training set")
    state = state if state is not None else TrainState()
    step = nn.adam_step if tcfg.optimizer == "adam" else nn.sgd_step
    n = len(y_train)
    n_batches = max(1, math.ceil(n / tcfg.batch_size))
    while state.epoch < tcfg.epochs:
        epoch = state.epoch
        rng = np.random.default_rng([tcfg.seed, epoch])
        order = rng.permutation(n)
        losses = []
        for bi, idx in enumerate(np.array_split(order, n_batches)):
            model.zero_grad()
            logits = model.forward(x_train[idx], True, rng)
            loss, grad = nn.softmax_cross_entropy(logits, y_train[idx])
            if not math.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss {loss} at epoch {epoch} batch {bi}")
            model.backward(grad)
            params, grads = _params(model)
            step(params, grads, state.adam, tcfg.lr)
            losses.append(loss * len(idx))
        valid_acc = accuracy(model, x_valid, y_valid) if len(y_valid) else float("nan")
        record = {"epoch": epoch, "loss": float(np.sum(losses) / n), "valid_acc": valid_acc}
        state.history.append(record)
        if state.best_state is None or valid_acc > state.best_valid:
            state.best_valid = valid_acc
            state.best_epoch = epoch
            state.best_state = {k: v.copy() for k, v in model.state_dict().items()}
        state.epoch += 1
        if on_epoch is not None:
            on_epoch(state)
    return state


# ---------------------------------------------------------------------------
# evaluation

@dataclass
class EvalReport:
    n: int
    accuracy: float
    classes: tuple
    per_class: dict
    groups: dict
    confusion: list

    def to_dict(self) -> dict:
        return {"n": self.n, "accuracy": self.accuracy, "classes": list(self.classes),
                "per_class": self.per_class, "groups": self.groups, "confusion": self.confusion}


def part_group(n_parts: int) -> str:
    return str(n_parts) if n_parts <= 5 else "6+"


def area_bin(ratio: float) -> str:
    for lo, hi in AREA_BINS:
        if lo <= ratio < hi:
            return f"[{lo:g},{hi:g})"
    raise ValueError(f"area ratio {ratio} outside every bin")


def _acc_block(correct: np.ndarray) -> dict:
    return {"n": int(len(correct)), "accuracy": float(np.mean(correct))}


def evaluate(pred, labels, classes, groupers: dict | None = None) -> EvalReport:
    """Overall, per-class and per-group accuracy; empty groups are omitted.

    ``groupers`` maps a grouping name to one key per sample.
    """
    pred = np.asarray(pred)
    labels = np.asarray(labels)
    if pred.shape != labels.shape:
        raise ValueError("predictions and labels differ in length")
    if len(labels) == 0:
        raise ValueError("cannot evaluate an empty dataset")
    correct = pred == labels
    per_class = {}
    for ci, name in enumerate(classes):
        mask = labels == ci
        if mask.any():
            per_class[name] = _acc_block(correct[mask])
    groups = {}
    for gname, keys in (groupers or {}).items():
        keys = np.asarray(keys, dtype=object)
        if len(keys) != len(labels):
            raise ValueError(f"grouping {gname!r} has {len(keys)} keys for {len(labels)} samples")
        groups[gname] = {str(k): _acc_block(correct[keys == k]) for k in dict.fromkeys(keys.tolist())}
    k = len(classes)
    confusion = np.zeros((k, k), dtype=int)
    np.add.at(confusion, (labels, pred), 1)
    return EvalReport(len(labels), float(np.mean(correct)), tuple(classes), per_class,
                      groups, confusion.tolist())


def shape_groupers(geoms) -> dict:
    return {"sub_polygons": [part_group(len(g.parts)) for g in geoms]}


def relation_groupers(pairs) -> dict:
    return {
        "sub_polygons": [part_group(len(s.parts)) for s, _ in pairs],
        "area_ratio": [area_bin(geometry_area(s) / geometry_area(o)) for s, o in pairs],
    }
