import numpy as np
import pytest

from polyenc.datagen import (
    DEFAULT_SLIVER_MAGNITUDE, SECTOR_MARGIN_DEG, SHAPE_CLASSES, gen_relation_dataset,
    gen_shape_dataset, hausdorff, read_ndjson, sliver_perturb, write_ndjson,
)
from polyenc.geometry import centroid, geometry_area, is_valid, points_in_geometry, serialize_wkt
from polyenc.tasks import RELATIONS, contains, deterministic_relation

import math


@pytest.fixture(scope="module")
def relations():
    return gen_relation_dataset(100, sliver_fraction=0.2, vertex_budget=64, seed=0)


def test_shape_dataset_basics():
    s = gen_shape_dataset(1, seed=0)
    assert [x.label for x in s] == [0, 1, 2, 3, 4] and len(SHAPE_CLASSES) == 5
    assert all(is_valid(x.geom) and x.geom.n_vertices == 128 for x in s)


def test_shape_class_structure():
    for s in gen_shape_dataset(20, vertex_budget=64, seed=1):
        assert s.geom.n_vertices == 64 and is_valid(s.geom)
        if s.label == 2:
            assert s.geom.n_holes == 1 and len(s.geom.parts) == 1
        elif s.label == 3:
            assert len(s.geom.parts) == 2 and s.geom.n_holes == 0
        else:
            assert len(s.geom.parts) == 1 and s.geom.n_holes == 0


def test_shape_star_spikes():
    for s in gen_shape_dataset(10, vertex_budget=256, seed=2):
        if s.label != 1:
            continue
        r = s.geom.parts[0].exterior
        c = centroid(s.geom)
        d = np.hypot(*(r - c).T)
        peaks = np.sum((d > np.roll(d, 1)) & (d >= np.roll(d, -1)) & (d > np.median(d)))
        assert 5 <= peaks <= 8


def test_shape_determinism():
    a = [serialize_wkt(s.geom) for s in gen_shape_dataset(3, seed=7)]
    b = [serialize_wkt(s.geom) for s in gen_shape_dataset(3, seed=7)]
    assert a == b
    c = [serialize_wkt(s.geom) for s in gen_shape_dataset(3, seed=8)]
    assert a != c


def test_relation_dataset_valid_and_labeled(relations):
    assert len(relations) == 900
    assert [s.relation for s in relations[:9]] == list(RELATIONS)
    for s in relations:
        assert is_valid(s.subject) and is_valid(s.object)


def test_directional_bearing_and_margin(relations):
    centers = {"east": 0, "northeast": 45, "north": 90, "northwest": 135, "west": 180,
               "southwest": 225, "south": 270, "southeast": 315}
    for s in relations:
        if s.relation == "isPartOf":
            continue
        dx, dy = centroid(s.subject) - centroid(s.object)
        bearing = math.degrees(math.atan2(dy, dx)) % 360
        off = (bearing - centers[s.relation] + 180) % 360 - 180
        assert abs(off) <= 22.5 - SECTOR_MARGIN_DEG + 1e-9
        assert not points_in_geometry(s.subject.vertices(), s.object).any()


def test_baseline_exact_without_slivers():
    clean = gen_relation_dataset(20, sliver_fraction=0.0, vertex_budget=64, seed=3)
    assert all(deterministic_relation(s.subject, s.object) == s.relation for s in clean)


def test_baseline_isPartOf_exactly_80_percent(relations):
    part = [s for s in relations if s.relation == "isPartOf"]
    hits = [deterministic_relation(s.subject, s.object) == "isPartOf" for s in part]
    assert sum(s.sliver for s in part) == 20
    assert np.mean(hits) == 0.8
    for s, h in zip(part, hits):
        assert h != s.sliver
        assert (not s.sliver) == points_in_geometry(s.subject.vertices(), s.object).all() or s.sliver


def test_sliver_contract():
    clean = gen_relation_dataset(100, sliver_fraction=0.0, seed=4)
    part = [s for s in clean if s.relation == "isPartOf"]
    changes = []
    for i, s in enumerate(part):
        out = sliver_perturb(s.subject, s.object, DEFAULT_SLIVER_MAGNITUDE, np.random.default_rng(i))
        assert is_valid(out) and not contains(out, s.object)
        assert deterministic_relation(out, s.object) != "isPartOf"
        moved = np.hypot(*(out.vertices() - s.subject.vertices()).T)
        assert 1 <= np.count_nonzero(moved) <= 3
        assert hausdorff(out, s.subject) <= 2 * moved.max() + 1e-12
        changes.append(abs(geometry_area(out) - geometry_area(s.subject)) / geometry_area(s.subject))
    assert len(changes) == 100
    assert max(changes) <= 0.01


def test_sliver_tiny_magnitude_still_crosses():
    s = gen_relation_dataset(1, vertex_budget=64, seed=5)[0]
    out = sliver_perturb(s.subject, s.object, 1e-9, np.random.default_rng(0))
    assert deterministic_relation(out, s.object) != "isPartOf"


def test_sliver_preconditions():
    s = gen_relation_dataset(1, vertex_budget=64, seed=5)
    with pytest.raises(ValueError):
        sliver_perturb(s[0].subject, s[0].object, 0.0)
    with pytest.raises(ValueError):
        sliver_perturb(s[1].subject, s[1].object, 0.02)


def test_relation_determinism():
    a = gen_relation_dataset(3, sliver_fraction=0.5, vertex_budget=48, seed=9)
    b = gen_relation_dataset(3, sliver_fraction=0.5, vertex_budget=48, seed=9)
    assert [serialize_wkt(x.subject) + serialize_wkt(x.object) for x in a] == \
           [serialize_wkt(x.subject) + serialize_wkt(x.object) for x in b]


def test_ndjson_round_trip(tmp_path):
    shapes = gen_shape_dataset(2, vertex_budget=32, seed=0)
    rels = gen_relation_dataset(1, sliver_fraction=1.0, vertex_budget=32, seed=0)
    for data, name in ((shapes, "s.ndjson"), (rels, "r.ndjson")):
        p = tmp_path / name
        write_ndjson(data, p)
        back = read_ndjson(p)
        assert len(back) == len(data)
        write_ndjson(back, tmp_path / ("again_" + name))
        assert (tmp_path / ("again_" + name)).read_bytes() == p.read_bytes()
    assert read_ndjson(tmp_path / "r.ndjson")[0].sliver is True
