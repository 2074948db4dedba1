"""Desk-scale experiment drivers shared by the acceptance suite and the README."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .encoders import Encoder, EncoderConfig
from .geometry import insert_trivial_vertices, loop_shift
from .tasks import (
    RELATIONS, RELATIONS_TASK, SHAPES, TaskModel, TrainConfig, build_model, deterministic_relation,
    model_inputs, relation_raw, shape_raw, train,
)


@dataclass
class RunResult:
    model: TaskModel
    test_acc: float
    history: list
    seconds: float
    extra: dict = field(default_factory=dict)


def split_valid(n: int, every: int = 10) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(n)
    return idx[idx % every != every - 1], idx[idx % every == every - 1]


def run_shapes(enc_cfg: EncoderConfig, tcfg: TrainConfig, train_set, test_set) -> RunResult:
    """Train on ``train_set`` (every tenth sample held out for model selection)
    and score the best-validation weights on ``test_set``."""
    t0 = time.perf_counter()
    probe = Encoder(enc_cfg)
    raw = shape_raw(probe, [s.geom for s in train_set])
    y = np.array([s.label for s in train_set])
    tr, va = split_valid(len(train_set))
    model = build_model(enc_cfg, tcfg, SHAPES, raw[tr])
    x = model_inputs(model.encoder, raw, 1)
    state = train(model, x[tr], y[tr], x[va], y[va], tcfg)
    model.load_state_dict(state.best_state)
    acc = shape_accuracy(model, [s.geom for s in test_set], np.array([s.label for s in test_set]))
    return RunResult(model, acc, state.history, time.perf_counter() - t0)


def shape_accuracy(model: TaskModel, geoms, labels) -> float:
    x = model_inputs(model.encoder, shape_raw(model.encoder, geoms), 1)
    return float(np.mean(model.predict_proba(x).argmax(axis=1) == labels))


def randomize_loops(geoms, seed: int):
    """Loop-origin randomization: every ring starts at a random vertex."""
    out = []
    for i, g in enumerate(geoms):
        rng = np.random.default_rng([seed, i])
        for pi, ri, r in g.rings():
            g = loop_shift(g, pi, ri, int(rng.integers(0, len(r))))
        out.append(g)
    return out


def upsample(geoms, factor: int, seed: int):
    """Trivial-vertex upsampling to ``factor`` times the vertex count."""
    return [insert_trivial_vertices(g, (factor - 1) * g.n_vertices, np.random.default_rng([seed, i]))
            for i, g in enumerate(geoms)]


def run_relations(enc_cfg: EncoderConfig, tcfg: TrainConfig, train_set, test_set) -> RunResult:
    t0 = time.perf_counter()
    probe = Encoder(enc_cfg)
    pairs = [(s.subject, s.object) for s in train_set]
    raw = relation_raw(probe, pairs)
    y = np.array([RELATIONS.index(s.relation) for s in train_set])
    tr, va = split_valid(len(train_set))
    model = build_model(enc_cfg, tcfg, RELATIONS_TASK, raw[tr])
    x = model_inputs(model.encoder, raw, 2)
    state = train(model, x[tr], y[tr], x[va], y[va], tcfg)
    model.load_state_dict(state.best_state)
    x_te = model_inputs(model.encoder, relation_raw(model.encoder, [(s.subject, s.object) for s in test_set]), 2)
    y_te = np.array([RELATIONS.index(s.relation) for s in test_set])
    pred = model.predict_proba(x_te).argmax(axis=1)
    return RunResult(model, float(np.mean(pred == y_te)), state.history, time.perf_counter() - t0,
                     {"pred": pred, "labels": y_te})


def baseline_relations(samples) -> tuple[float, float]:
    """Deterministic baseline: (overall accuracy, accuracy on isPartOf samples)."""
    hits = np.array([deterministic_relation(s.subject, s.object) == s.relation for s in samples])
    part = np.array([s.relation == "isPartOf" for s in samples])
    return float(hits.mean()), float(hits[part].mean())
