import numpy as np
import pytest

from conftest import random_geoms, square
from polyenc import nn
from polyenc.encoders import (
    DDSL_MLP, NUFTSPEC_GEOMETRIC, NUFTSPEC_LINEAR, RESNET1D, VEERCNN, Encoder, EncoderConfig,
    boundary_concat, build_encoder, ddsl_mlp_encode, kdelta_encode, nuftspec_encode,
    resnet1d_encode, veercnn_encode,
)
from polyenc.geometry import (
    NUFT_SPACE, GeometryError, PolyGeom, loop_shift,
    normalize_unit, permute_parts, resample_geometry,
)
from polyenc.propcheck import embedding_suite, untrained_encoder


def ring64(seed=0):
    rng = np.random.default_rng(seed)
    th = np.sort(rng.uniform(0, 2 * np.pi, 64))
    rad = 1 + 0.3 * rng.uniform(size=64)
    return PolyGeom.from_rings(np.stack([rad * np.cos(th), rad * np.sin(th)], 1))


# --- kdelta and boundary concatenation --------------------------------------

def test_kdelta_t0():
    x = np.random.default_rng(0).standard_normal((5, 2))
    np.testing.assert_array_equal(kdelta_encode(x, 0), x)


def test_kdelta_unit_square():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    out = kdelta_encode(sq, 1)
    assert out.shape == (4, 6)
    # predecessor of (0,0) is (0,1), successor (1,0)
    np.testing.assert_array_equal(out[0], [0, 0, 0, 1, 1, 0])


def test_kdelta_rotation_is_row_permutation():
    th = np.arange(6) * np.pi / 3
    hexagon = np.stack([np.cos(th), np.sin(th)], 1)
    base = kdelta_encode(hexagon, 2)
    for s in range(6):
        np.testing.assert_allclose(kdelta_encode(np.roll(hexagon, -s, 0), 2), np.roll(base, -s, 0))


def test_kdelta_too_short():
    with pytest.raises(GeometryError):
        kdelta_encode(np.zeros((4, 2)), 2)


def test_boundary_concat():
    g = PolyGeom.from_rings(square())
    np.testing.assert_array_equal(boundary_concat(g), square())
    two = PolyGeom(((square(side=1),), (square(3, 3, 1),)))
    assert not np.array_equal(boundary_concat(two), boundary_concat(permute_parts(two, [1, 0])))


# --- configuration ----------------------------------------------------------

def test_config_round_trip_and_validation():
    cfg = EncoderConfig(NUFTSPEC_GEOMETRIC, d=16, N_wx=8, w_max=4.0, pca_var=0.9)
    assert EncoderConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        EncoderConfig.from_dict({**cfg.to_dict(), "bogus": 1})
    with pytest.raises(ValueError):
        EncoderConfig(RESNET1D, d=0)
    with pytest.raises(ValueError):
        EncoderConfig("gcae")


# --- invariances -------------------------------------------------------------

def _built(cfg, geoms, seed=0):
    return untrained_encoder(cfg, geoms, seed)


def test_resnet1d_even_shift_invariance():
    g = ring64()
    enc = _built(EncoderConfig(RESNET1D, d=16, t=2, K=1), [g])
    base = resnet1d_encode(g, enc)
    for s in range(0, 64, 2):
        np.testing.assert_allclose(resnet1d_encode(loop_shift(g, 0, 0, s), enc), base, atol=1e-6)
    odd = max(np.linalg.norm(resnet1d_encode(loop_shift(g, 0, 0, s), enc) - base) for s in range(1, 64, 2))
    assert odd > 0  # odd shifts are only approximately invariant


def test_veercnn_not_loop_invariant():
    g = ring64(1)
    enc = _built(EncoderConfig(VEERCNN, d=16), [g])
    base = veercnn_encode(g, enc)
    assert max(np.linalg.norm(veercnn_encode(loop_shift(g, 0, 0, s), enc) - base) for s in range(64)) > 1e-3
    np.testing.assert_array_equal(veercnn_encode(g, enc), base)


@pytest.mark.parametrize("cfg", [
    EncoderConfig(NUFTSPEC_GEOMETRIC, d=16, N_wx=12, w_max=6.0, pca_var=0.95),
    EncoderConfig(NUFTSPEC_LINEAR, d=16, N_wx=12),
    EncoderConfig(DDSL_MLP, d=16, N_wx=12, raster_side=16, pca_var=0.95),
], ids=["geometric", "linear", "ddsl"])
def test_spectral_embedding_suite(cfg):
    geoms = random_geoms(20, seed=2)
    enc = _built(cfg, geoms)
    report = embedding_suite(enc, geoms, seed=0)
    assert report["all_pass"], report
    assert {"loop", "triv", "parp", "topo"} <= set(report["properties"])


def test_spectral_encoders_differ():
    geoms = random_geoms(12, seed=3)
    a = _built(EncoderConfig(NUFTSPEC_LINEAR, d=8, N_wx=12), geoms)
    b = _built(EncoderConfig(DDSL_MLP, d=8, N_wx=12, raster_side=12), geoms)
    g = a.normalize(geoms[0])
    assert not np.allclose(nuftspec_encode(g, a), ddsl_mlp_encode(g, b))


def test_encoders_finite_and_deterministic():
    geoms = [resample_geometry(g, 48) for g in random_geoms(10, seed=4)]
    for cfg in (EncoderConfig(NUFTSPEC_GEOMETRIC, d=8, N_wx=10, w_max=5.0),
                EncoderConfig(RESNET1D, d=8, t=2), EncoderConfig(VEERCNN, d=8, veer_hidden=8)):
        enc = _built(cfg, geoms)
        e = enc.embed(geoms)
        assert e.shape == (10, 8) and np.all(np.isfinite(e))
        np.testing.assert_array_equal(enc.embed(geoms), e)


def test_ddsl_uses_linear_map():
    enc = Encoder(EncoderConfig(DDSL_MLP, d=8, N_wx=12, raster_side=12))
    assert enc.cfg.freq_map().kind == "linear"


def test_too_few_vertices():
    enc = Encoder(EncoderConfig(VEERCNN, d=8))
    with pytest.raises(GeometryError):
        enc.featurize(PolyGeom.from_rings([(0, 0), (1, 0), (0, 1)]))


# --- gradients through full encoders ---------------------------------------

def test_grad_check_resnet1d_encoder():
    g = resample_geometry(ring64(2), 64)
    g = PolyGeom.from_rings(g.parts[0].exterior[::2])  # 32 vertices
    enc = Encoder(EncoderConfig(RESNET1D, d=4, t=1, K=1, dropout=0.5)).build(np.random.default_rng(0))
    x = np.stack([enc.featurize(enc.normalize(g)), enc.featurize(enc.normalize(loop_shift(g, 0, 0, 3)))])
    assert x.shape == (2, 6, 32)
    assert nn.grad_check(enc, x) < 1e-4


def test_grad_check_nuftspec_encoder():
    geoms = random_geoms(8, seed=5)
    enc = _built(EncoderConfig(NUFTSPEC_GEOMETRIC, d=4, N_wx=6, w_max=3.0, mlp_hidden=5, mlp_layers=2,
                               pca_var=0.99), geoms)
    x = enc.preprocess(enc.featurize_many([enc.normalize(g) for g in geoms[:3]]))
    assert nn.grad_check(enc, x) < 1e-4


def test_build_encoder_requires_training_geometries():
    cfg = EncoderConfig(NUFTSPEC_GEOMETRIC, d=8, N_wx=8, w_max=4.0, pca_var=0.9)
    with pytest.raises(ValueError):
        build_encoder(cfg)
    gs = [normalize_unit([g], NUFT_SPACE)[0][0] for g in random_geoms(10)]
    assert build_encoder(cfg, gs).embed(gs[:2], normalize=False).shape == (2, 8)
