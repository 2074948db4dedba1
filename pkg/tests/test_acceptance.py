"""Acceptance criteria 1-9.

Each criterion prints one ``PASS``/``FAIL`` line with its measured values,
and the same lines are repeated in the pytest terminal summary. Run directly
with ``python3 tests/test_acceptance.py`` or through pytest.

Reference run (single CPU core, seeds as below), used to pin the trend
targets: shapes NUFTspec[geometric] 99.8%, NUFTspec[linear] 97.4%, ResNet1D
100% (98.6% after 2x upsampling); relations baseline 97.78% overall / 80% on
isPartOf, NUFTspec[geometric] 99.0%, ResNet1D circular 100% vs zero padding
99.78%.
"""
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import random_triangle_case, triangle_quadrature  # noqa: E402
from polyenc import datagen, kernels, nn  # noqa: E402
from polyenc.encoders import (  # noqa: E402
    NUFTSPEC_GEOMETRIC, NUFTSPEC_LINEAR, RESNET1D, VEERCNN, Encoder, EncoderConfig,
)
from polyenc.experiments import (  # noqa: E402
    baseline_relations, randomize_loops, run_relations, run_shapes, shape_accuracy, upsample,
)
from polyenc.geometry import loop_shift  # noqa: E402
from polyenc.propcheck import corpus, embedding_suite, spectral_suite, untrained_encoder  # noqa: E402
from polyenc.spectral import geometric_grid, linear_grid, n_components_for  # noqa: E402
from polyenc.tasks import TrainConfig, shape_raw  # noqa: E402

pytestmark = pytest.mark.acceptance

RESULTS: list[str] = []

SHAPE_KW = dict(d=64, N_wx=24, w_min=0.5, w_max=12.0, mlp_hidden=128, mlp_layers=1, t=2, K=1)
SHAPE_TRAIN = TrainConfig(lr=1e-3, epochs=20, batch_size=32, seed=0)
RELATION_NUFT_TRAIN = TrainConfig(lr=1e-3, epochs=20, batch_size=32, seed=0)
RELATION_RESNET_TRAIN = TrainConfig(lr=1e-3, epochs=15, batch_size=32, seed=0)


def report(number: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    RESULTS.append(line)
    print(line, flush=True)


# ---------------------------------------------------------------------------
# shared data and models

@pytest.fixture(scope="module")
def shape_sets():
    return datagen.gen_shape_dataset(400, 128, seed=0), datagen.gen_shape_dataset(100, 128, seed=1)


@pytest.fixture(scope="module")
def relation_sets():
    return (datagen.gen_relation_dataset(400, 0.2, 128, seed=0),
            datagen.gen_relation_dataset(100, 0.2, 128, seed=1))


@pytest.fixture(scope="module")
def shape_runs(shape_sets):
    train, test = shape_sets
    runs = {}
    for kind, extra in ((NUFTSPEC_GEOMETRIC, {}), (NUFTSPEC_LINEAR, {}), (RESNET1D, {})):
        runs[kind] = run_shapes(EncoderConfig(kind, **SHAPE_KW, **extra), SHAPE_TRAIN, train, test)
    return runs


# ---------------------------------------------------------------------------
# 1. spectral invariance suite

def test_criterion_1_invariance_suite():
    t0 = time.perf_counter()
    geoms = corpus(200, seed=0, budget=64)
    r = spectral_suite(geoms, geometric_grid(24, 0.5, 12.0), seed=0)
    seconds = time.perf_counter() - t0
    ok = (r["loop_max_abs"] <= 1e-9 and r["triv_max_rel"] <= 1e-7 and r["parp_max_abs"] <= 1e-9
          and r["dc_max_rel"] <= 1e-10 and r["topo_min_abs"] >= 1e-3 and r["counts"]["topo"] > 0
          and seconds < 120)
    report(1, ok, f"loop {r['loop_max_abs']:.2e} triv {r['triv_max_rel']:.2e} parp {r['parp_max_abs']:.2e} "
                  f"dc {r['dc_max_rel']:.2e} topo_min {r['topo_min_abs']:.2e} counts {r['counts']} "
                  f"in {seconds:.1f}s")
    assert ok


# ---------------------------------------------------------------------------
# 2. quadrature oracle

def test_criterion_2_quadrature_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(50):
        tri, omega, sign = random_triangle_case(rng)
        got = kernels.nuft_triangles(tri, np.roll(tri, -1, 0), np.ones(3), omega)
        worst = max(worst, float(np.max(np.abs(got - sign * triangle_quadrature(tri, omega)))))
    seconds = time.perf_counter() - t0
    ok = worst <= 1e-8 and seconds < 300
    report(2, ok, f"max |nuft - quadrature| {worst:.2e} over 50x20 in {seconds:.1f}s")
    assert ok


# ---------------------------------------------------------------------------
# 3. gradient suite

def _gradient_cases():
    r = np.random.default_rng
    yield "dense", nn.Dense(3, 4, r(0)), r(1).standard_normal((5, 3))
    yield "conv1d circular", nn.Conv1d(2, 3, r(0)), r(1).standard_normal((2, 2, 8))
    yield "conv1d zero stride 2", nn.Conv1d(2, 3, r(0), stride=2, padding=nn.ZERO), r(1).standard_normal((2, 2, 9))
    yield "batchnorm", nn.BatchNorm1d(3), r(2).standard_normal((4, 3, 6))
    yield "layernorm", nn.LayerNorm(5), r(3).standard_normal((3, 5))
    yield "relu", nn.ReLU(), r(4).standard_normal((4, 6))
    yield "dropout", nn.Dropout(0.5), r(5).standard_normal((4, 6))
    for pad in (nn.CIRCULAR, nn.ZERO, nn.NONE):
        yield f"maxpool {pad}", nn.MaxPool1d(2, 2, pad), r(6).standard_normal((2, 3, 7))
    yield "global maxpool", nn.GlobalMaxPool(), r(7).standard_normal((2, 3, 7))
    yield "global avgpool", nn.GlobalAvgPool(), r(7).standard_normal((2, 3, 7))
    yield "residual block", nn.ResidualBlock1d(2, r(8)), r(9).standard_normal((3, 2, 8))
    yield "residual dense", nn.ResidualDense(4, 6, r(10)), r(11).standard_normal((3, 4))

    geoms = corpus(6, seed=3, budget=32)
    res = Encoder(EncoderConfig(RESNET1D, d=4, t=1, K=1)).build(r(12))
    yield "resnet1d encoder", res, np.stack([res.featurize(res.normalize(g)) for g in geoms[:2]])
    nuf = untrained_encoder(EncoderConfig(NUFTSPEC_GEOMETRIC, d=4, N_wx=6, w_max=3.0, mlp_hidden=5,
                                          mlp_layers=2, pca_var=0.99), geoms, seed=13)
    yield "nuftspec encoder", nuf, nuf.preprocess(nuf.featurize_many([nuf.normalize(g) for g in geoms[:3]]))


def test_criterion_3_gradient_suite():
    t0 = time.perf_counter()
    errs = {name: nn.grad_check(m, x) for name, m, x in _gradient_cases()}
    logits = np.random.default_rng(14).standard_normal((4, 5))
    labels = np.array([0, 3, 4, 1])
    _, g = nn.softmax_cross_entropy(logits, labels)
    errs["softmax cross-entropy"] = nn.relative_error(
        g, nn.numeric_grad(lambda: nn.softmax_cross_entropy(logits, labels)[0], logits))
    seconds = time.perf_counter() - t0
    worst = max(errs, key=errs.get)
    ok = max(errs.values()) < 1e-4 and seconds < 120
    report(3, ok, f"{len(errs)} checks, worst {worst} {errs[worst]:.2e} in {seconds:.1f}s")
    assert ok, errs


# ---------------------------------------------------------------------------
# 4. equivariance suite

def test_criterion_4_equivariance():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((2, 3, 8))
    W = rng.standard_normal((4, 3, 3))
    conv = nn.conv1d(x, W, stride=1, pad=nn.CIRCULAR)[0]
    pool = nn.maxpool1d(x, 3, 1, nn.CIRCULAR)[0]
    conv_dev = max(np.abs(nn.conv1d(np.roll(x, s, 2), W)[0] - np.roll(conv, s, 2)).max() for s in range(8))
    pool_dev = max(np.abs(nn.maxpool1d(np.roll(x, s, 2), 3, 1)[0] - np.roll(pool, s, 2)).max() for s in range(8))

    simple = [g for g in corpus(40, seed=4, budget=64) if len(g.parts) == 1 and not g.n_holes]
    res = untrained_encoder(EncoderConfig(RESNET1D, d=16, t=2, K=1), simple, seed=0)
    res_dev = 0.0
    for g in simple:
        base = res.embed([g])[0]
        for s in range(2, len(g.parts[0].exterior), 2):
            res_dev = max(res_dev, float(np.linalg.norm(res.embed([loop_shift(g, 0, 0, s)])[0] - base)))

    veer = untrained_encoder(EncoderConfig(VEERCNN, d=16), simple, seed=0)
    g = simple[0]
    base = veer.embed([g])[0]
    veer_dev = max(float(np.linalg.norm(veer.embed([loop_shift(g, 0, 0, s)])[0] - base))
                   for s in range(len(g.parts[0].exterior)))
    ok = conv_dev <= 1e-12 and pool_dev == 0 and res_dev <= 1e-6 and veer_dev > 1e-3
    report(4, ok, f"conv {conv_dev:.1e} pool {pool_dev:.1e} resnet1d even-shift {res_dev:.1e} "
                  f"({len(simple)} rings) veercnn max {veer_dev:.3f}")
    assert ok


# ---------------------------------------------------------------------------
# 5. shape-classification trend

def test_criterion_5_shape_trend(shape_runs):
    geo = shape_runs[NUFTSPEC_GEOMETRIC]
    lin = shape_runs[NUFTSPEC_LINEAR]
    res = shape_runs[RESNET1D]
    seconds = geo.seconds + lin.seconds + res.seconds
    gap = 100 * (geo.test_acc - lin.test_acc)
    ok = geo.test_acc >= 0.95 and res.test_acc >= 0.95 and gap >= 1.0 and seconds < 1200
    report(5, ok, f"geometric {100 * geo.test_acc:.1f}% resnet1d {100 * res.test_acc:.1f}% "
                  f"linear {100 * lin.test_acc:.1f}% (gap {gap:.1f} pts) in {seconds:.0f}s, "
                  f"{SHAPE_TRAIN.epochs} epochs")
    assert ok


# ---------------------------------------------------------------------------
# 6. property vs accuracy under shape-preserving modifications

def test_criterion_6_modifications(shape_runs, shape_sets):
    _, test = shape_sets
    geoms = [s.geom for s in test]
    y = np.array([s.label for s in test])
    loops = randomize_loops(geoms, seed=3)
    up2 = upsample(geoms, 2, seed=4)

    geo = shape_runs[NUFTSPEC_GEOMETRIC].model
    base = shape_raw(geo.encoder, geoms)
    scale = np.abs(base).max()
    feat_dev = max(np.abs(shape_raw(geo.encoder, v) - base).max() for v in (loops, up2)) / scale
    geo_acc = [shape_accuracy(geo, v, y) for v in (geoms, loops, up2)]

    res = shape_runs[RESNET1D].model
    res_acc = [shape_accuracy(res, v, y) for v in (geoms, loops, up2)]
    drop = 100 * (res_acc[0] - res_acc[2])
    ok = geo_acc[0] == geo_acc[1] == geo_acc[2] and feat_dev <= 1e-7 and drop > 0.5
    report(6, ok, f"nuftspec {[round(100 * a, 2) for a in geo_acc]} (feature dev {feat_dev:.1e}); "
                  f"resnet1d base/loop/2x {[round(100 * a, 2) for a in res_acc]} (2x drop {drop:.1f} pts)")
    assert ok


# ---------------------------------------------------------------------------
# 7. relation trend

def test_criterion_7_relation_trend(relation_sets):
    train, test = relation_sets
    base_all, base_part = baseline_relations(test)
    run = run_relations(EncoderConfig(NUFTSPEC_GEOMETRIC, **SHAPE_KW), RELATION_NUFT_TRAIN, train, test)
    gap = 100 * (run.test_acc - base_all)
    ok = base_part == 0.8 and gap >= 10 and RELATION_NUFT_TRAIN.epochs <= 50 and run.seconds < 1800
    report(7, ok, f"baseline {100 * base_all:.2f}% overall, isPartOf {100 * base_part:.1f}%; "
                  f"nuftspec[geometric] {100 * run.test_acc:.2f}% (gap {gap:+.2f} pts, need >= 10) "
                  f"in {run.seconds:.0f}s")
    assert ok


# ---------------------------------------------------------------------------
# 8. PCA compactness

def test_criterion_8_pca_compactness(shape_sets):
    train, _ = shape_sets
    geoms = [s.geom for s in train]
    counts = {}
    for n_wx in (16, 24, 32):
        for kind in (NUFTSPEC_GEOMETRIC, NUFTSPEC_LINEAR):
            enc = Encoder(EncoderConfig(kind, N_wx=n_wx, w_min=0.5, w_max=n_wx / 2))
            counts[(n_wx, kind)] = n_components_for(shape_raw(enc, geoms), 0.9)
    ok = all(counts[(n, NUFTSPEC_GEOMETRIC)] <= counts[(n, NUFTSPEC_LINEAR)] for n in (16, 24, 32))
    report(8, ok, "components for 90% variance geometric/linear: " + ", ".join(
        f"N_wx={n}: {counts[(n, NUFTSPEC_GEOMETRIC)]}/{counts[(n, NUFTSPEC_LINEAR)]}" for n in (16, 24, 32)))
    assert ok


# ---------------------------------------------------------------------------
# 9. padding ablation

def test_criterion_9_padding_ablation(relation_sets):
    train, test = relation_sets
    acc = {}
    for pad in ("circular", "zero"):
        cfg = EncoderConfig(RESNET1D, **SHAPE_KW, padding=pad)
        acc[pad] = run_relations(cfg, RELATION_RESNET_TRAIN, train, test).test_acc
    drop = 100 * (acc["circular"] - acc["zero"])
    ok = drop >= 1.0
    report(9, ok, f"resnet1d circular {100 * acc['circular']:.2f}% zero {100 * acc['zero']:.2f}% "
                  f"(drop {drop:+.2f} pts, need >= 1)")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
