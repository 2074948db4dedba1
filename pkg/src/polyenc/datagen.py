"""Seed-deterministic synthetic datasets: five shape classes and nine spatial relations.

Each sample draws from its own generator seeded by ``(seed, index)``, so a
sample depends only on the dataset seed and its position. Datasets are
stored as newline-delimited JSON with WKT geometries.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    GeometryError, Polygon, PolyGeom, centroid, enforce_orientation,
    parse_wkt, point_in_polygon, resample_geometry, serialize_wkt, simplify, validate,
)
from .tasks import RELATIONS, contains, sector_of

SHAPE_CLASSES = ("convex_blob", "star", "annulus", "two_part", "c_shape")
DEFAULT_BUDGET = 128
SECTOR_MARGIN_DEG = 5.0
DEFAULT_SLIVER_MAGNITUDE = 0.02
MAX_ATTEMPTS = 200


@dataclass(frozen=True, eq=False)
class ShapeSample:
    id: str
    label: int
    geom: PolyGeom


@dataclass(frozen=True, eq=False)
class RelationSample:
    id: str
    subject: PolyGeom
    object: PolyGeom
    relation: str
    sliver: bool = False


# ---------------------------------------------------------------------------
# ring primitives (counterclockwise, centered near the origin, radius ~1)

def _radial_ring(radii, phase: float = 0.0) -> np.ndarray:
    n = len(radii)
    ang = phase + 2 * math.pi * np.arange(n) / n
    return np.stack([radii * np.cos(ang), radii * np.sin(ang)], axis=1)


def _smooth_radii(rng, n: int, amp: float, harmonics: int = 3) -> np.ndarray:
    ang = 2 * math.pi * np.arange(n) / n
    r = np.ones(n)
    for h in range(2, 2 + harmonics):
        r += amp / h * rng.uniform(-1, 1) * np.cos(h * ang + rng.uniform(0, 2 * math.pi))
    return r


def _blob(rng, n: int = 40) -> np.ndarray:
    a, b = rng.uniform(0.6, 1.0, size=2)
    ang = 2 * math.pi * np.arange(n) / n
    r = _smooth_radii(rng, n, 0.06)
    return np.stack([a * r * np.cos(ang), b * r * np.sin(ang)], axis=1)


def _star(rng) -> np.ndarray:
    spikes = int(rng.integers(5, 9))
    inner = rng.uniform(0.35, 0.55)
    radii = np.tile([1.0, inner], spikes) * rng.uniform(0.9, 1.1, size=2 * spikes)
    return _radial_ring(radii, rng.uniform(0, 2 * math.pi))


def _annulus(rng) -> tuple[np.ndarray, np.ndarray]:
    outer = _radial_ring(_smooth_radii(rng, 36, 0.08))
    hole_r = rng.uniform(0.3, 0.55)
    shift = rng.uniform(-0.1, 0.1, size=2)
    hole = _radial_ring(hole_r * _smooth_radii(rng, 20, 0.08))[::-1] + shift
    return outer, hole


def _two_part(rng) -> tuple[np.ndarray, np.ndarray]:
    ra, rb = rng.uniform(0.35, 0.55, size=2)
    gap = rng.uniform(0.1, 0.4)
    a = ra * _blob(rng, 24)
    b = rb * _blob(rng, 24)
    offset = ra + rb + gap
    return a - [offset / 2, 0], b + [offset / 2, 0]


def _c_shape(rng) -> np.ndarray:
    opening = math.radians(rng.uniform(50, 100))
    inner = rng.uniform(0.45, 0.7)
    n = 24
    ang = np.linspace(opening / 2, 2 * math.pi - opening / 2, n)
    outer_arc = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    inner_arc = inner * outer_arc[::-1]
    return np.concatenate([outer_arc, inner_arc])


def _place(rings_by_part, rng, jitter: float = 0.01) -> PolyGeom:
    """Random rotation, isotropic scale, translation and vertex jitter."""
    theta = rng.uniform(0, 2 * math.pi)
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    scale = rng.uniform(0.5, 2.0)
    shift = rng.uniform(-5, 5, size=2)
    parts = []
    for rings in rings_by_part:
        moved = [((r + rng.normal(0, jitter, size=r.shape)) @ rot.T) * scale + shift for r in rings]
        parts.append(Polygon(moved[0], tuple(moved[1:])))
    return enforce_orientation(PolyGeom(tuple(parts)))


def _fit_budget(g: PolyGeom, budget: int) -> PolyGeom:
    if g.n_vertices > budget:
        g = simplify(g, budget)
    return resample_geometry(g, budget)


def make_shape(label: int, rng: np.random.Generator, budget: int = DEFAULT_BUDGET) -> PolyGeom:
    for _ in range(MAX_ATTEMPTS):
        if label == 0:
            rings = [[_blob(rng)]]
        elif label == 1:
            rings = [[_star(rng)]]
        elif label == 2:
            rings = [list(_annulus(rng))]
        elif label == 3:
            rings = [[r] for r in _two_part(rng)]
        elif label == 4:
            rings = [[_c_shape(rng)]]
        else:
            raise ValueError(f"unknown shape class {label}")
        g = _place(rings, rng)
        if validate(g):
            continue
        g = _fit_budget(g, budget)
        if not validate(g):
            return g
    raise GeometryError(f"could not generate a valid class-{label} shape")


def gen_shape_dataset(n_per_class: int, vertex_budget: int = DEFAULT_BUDGET,
                      seed: int = 0) -> list[ShapeSample]:
    """Class-balanced samples ordered by index; sample ``i`` has class ``i % 5``."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be at least 1")
    out = []
    n_classes = len(SHAPE_CLASSES)
    for i in range(n_per_class * n_classes):
        rng = np.random.default_rng([seed, i])
        label = i % n_classes
        out.append(ShapeSample(f"shape-{i:06d}", label, make_shape(label, rng, vertex_budget)))
    return out


# ---------------------------------------------------------------------------
# relations

def _random_region(rng, budget: int) -> PolyGeom:
    """A simple polygon: blob or star, unit-ish radius centered at the origin."""
    ring = _blob(rng) if rng.random() < 0.6 else _star(rng)
    ring = ring @ _rotation(rng.uniform(0, 2 * math.pi)).T
    return _fit_budget(enforce_orientation(PolyGeom.from_rings(ring)), budget)


def _rotation(theta: float) -> np.ndarray:
    return np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])


def _transform(g: PolyGeom, scale: float, shift) -> PolyGeom:
    return g.map_rings(lambda r: r * scale + np.asarray(shift))


def _radius(g: PolyGeom, about) -> float:
    return float(np.max(np.hypot(*(g.vertices() - about).T)))


def _contained_pair(rng, budget: int) -> tuple[PolyGeom, PolyGeom]:
    obj = _transform(_random_region(rng, budget), rng.uniform(0.5, 3.0), rng.uniform(-5, 5, size=2))
    c = centroid(obj)
    r_obj = _radius(obj, c)
    for _ in range(MAX_ATTEMPTS):
        sub0 = _random_region(rng, budget)
        c0 = centroid(sub0)
        scale = r_obj * rng.uniform(0.1, 0.7) / _radius(sub0, c0)
        for _ in range(20):
            spot = c + rng.uniform(-0.5, 0.5, size=2) * r_obj
            sub = _transform(sub0, scale, spot - c0 * scale)
            if contains(sub, obj) and _clearance(sub, obj) > 1e-3 * r_obj:
                return _hug_boundary(sub, obj, rng), obj
            scale *= 0.85
    raise GeometryError("could not place a contained subject")


def _hug_boundary(sub: PolyGeom, obj: PolyGeom, rng) -> PolyGeom:
    """Slide a contained subject toward the object boundary, leaving a
    clearance of 1-5% of the subject radius (administrative units typically
    share most of their container's border)."""
    r_sub = _radius(sub, centroid(sub))
    a, b = _boundary_segments(obj)
    dist, proj = _seg_point_dist(sub.vertices(), a, b)
    flat = int(np.argmin(dist))
    i, j = divmod(flat, dist.shape[1])
    gap = dist[i, j]
    goal = rng.uniform(0.01, 0.05) * r_sub
    if gap <= goal:
        return sub
    direction = (proj[i, j] - sub.vertices()[i]) / gap
    step = gap - goal
    for _ in range(30):
        moved = _transform(sub, 1.0, direction * step)
        if contains(moved, obj) and _clearance(moved, obj) > 1e-3 * r_sub:
            return moved
        step *= 0.5
    return sub


def _directional_pair(relation: str, rng, budget: int) -> tuple[PolyGeom, PolyGeom]:
    center_deg = SECTOR_CENTERS[relation]
    half = 22.5 - SECTOR_MARGIN_DEG
    for _ in range(MAX_ATTEMPTS):
        obj = _transform(_random_region(rng, budget), rng.uniform(0.5, 3.0), rng.uniform(-5, 5, size=2))
        sub0 = _random_region(rng, budget)
        sub0 = _transform(sub0, rng.uniform(0.3, 3.0), (0.0, 0.0))
        c_obj, c_sub0 = centroid(obj), centroid(sub0)
        bearing = math.radians(center_deg + rng.uniform(-half, half))
        dist = (_radius(obj, c_obj) + _radius(sub0, c_sub0)) * rng.uniform(1.05, 2.0)
        target = c_obj + dist * np.array([math.cos(bearing), math.sin(bearing)])
        sub = _transform(sub0, 1.0, target - c_sub0)
        dx, dy = centroid(sub) - c_obj
        deg = math.degrees(math.atan2(dy, dx)) % 360
        off = (deg - center_deg + 180) % 360 - 180
        if abs(off) <= half and sector_of(deg) == relation:
            return sub, obj
    raise GeometryError(f"could not place a {relation} pair")


SECTOR_CENTERS = {
    "east": 0.0, "northeast": 45.0, "north": 90.0, "northwest": 135.0,
    "west": 180.0, "southwest": 225.0, "south": 270.0, "southeast": 315.0,
}


def _seg_point_dist(p, a, b) -> np.ndarray:
    """Distance from each point in ``p`` (n, 2) to every segment a[j]-b[j]; returns (n, m)."""
    ab = b - a
    ap = p[:, None, :] - a[None, :, :]
    denom = np.maximum((ab * ab).sum(axis=1), 1e-300)
    t = np.clip((ap * ab[None]).sum(axis=2) / denom, 0.0, 1.0)
    proj = a[None] + t[..., None] * ab[None]
    return np.hypot(*(p[:, None, :] - proj).transpose(2, 0, 1)), proj


def _boundary_segments(g: PolyGeom) -> tuple[np.ndarray, np.ndarray]:
    a = np.concatenate([r for _, _, r in g.rings()])
    b = np.concatenate([np.roll(r, -1, axis=0) for _, _, r in g.rings()])
    return a, b


def _clearance(sub: PolyGeom, obj: PolyGeom) -> float:
    a, b = _boundary_segments(obj)
    d, _ = _seg_point_dist(sub.vertices(), a, b)
    return float(d.min())


def hausdorff(a: PolyGeom, b: PolyGeom) -> float:
    """Symmetric Hausdorff distance between the vertex-and-edge boundaries."""
    def one_way(x, y):
        sa, sb = _boundary_segments(y)
        return float(_seg_point_dist(x.vertices(), sa, sb)[0].min(axis=1).max())
    return max(one_way(a, b), one_way(b, a))


def sliver_perturb(g_sub: PolyGeom, g_obj: PolyGeom, magnitude: float = DEFAULT_SLIVER_MAGNITUDE,
                   rng: np.random.Generator | None = None, retries: int = 10) -> PolyGeom:
    """Push a run of 1-3 subject vertices around the one nearest the object
    boundary just across that boundary.

    The run moves rigidly toward the nearest object-boundary point by the
    clearance plus an overshoot of ``u * magnitude * (clearance + 0.01 *
    object diameter)`` with ``u ~ U(0.5, 1]``. If the result does not cross
    the object boundary or is not a valid geometry, the overshoot doubles and
    the run length is redrawn, at most ``retries`` times.
    """
    if not magnitude > 0:
        raise ValueError("sliver magnitude must be positive")
    if not contains(g_sub, g_obj):
        raise GeometryError("sliver_perturb needs the subject inside the object")
    rng = rng if rng is not None else np.random.default_rng(0)
    verts = g_sub.vertices()
    a, b = _boundary_segments(g_obj)
    dist, proj = _seg_point_dist(verts, a, b)
    clearance = dist.min(axis=1)
    center = int(np.argmin(clearance))
    v = verts[center]
    diameter = float(np.hypot(*(g_obj.vertices().max(axis=0) - g_obj.vertices().min(axis=0))))
    # aim at a point inside one of the nearest object edges (never a corner,
    # where the push may stay inside) whose far side is really exterior
    goal = None
    for seg in np.argsort(dist[center], kind="stable")[:8]:
        ab = b[seg] - a[seg]
        t = float(np.clip(np.dot(v - a[seg], ab) / np.dot(ab, ab), 0.1, 0.9))
        cand = a[seg] + t * ab
        gap = float(np.linalg.norm(cand - v))
        probe = cand + (cand - v) / gap * 0.5 * magnitude * (gap + 0.01 * diameter)
        if not point_in_polygon(probe, g_obj):
            goal = cand
            break
    if goal is None:
        raise GeometryError("no object edge near the subject can be crossed")
    clearance = float(np.linalg.norm(goal - v))
    direction = (goal - v) / clearance
    lo, hi = _ring_span(g_sub, center)
    span = hi - lo
    boost = 1.0
    for _ in range(retries):
        k = int(rng.integers(1, 4))
        first = int(rng.integers(0, k))
        run = [lo + (center - lo + j - first) % span for j in range(k)]
        overshoot = rng.uniform(0.5, 1.0) * magnitude * boost * (clearance + 0.01 * diameter)
        # every vertex of the run must end up at least as far past the boundary as the nearest one
        shift = clearance + overshoot
        moved = verts.copy()
        moved[run] += direction * shift
        out = _rebuild(g_sub, moved)
        if not validate(out) and not contains(out, g_obj):
            return out
        boost *= 2
    raise GeometryError(f"no boundary-crossing sliver after {retries} retries")


def _ring_span(g: PolyGeom, index: int) -> tuple[int, int]:
    """``[lo, hi)`` range of the flat vertex indices of the ring holding ``index``."""
    lo = 0
    for _, _, r in g.rings():
        if index < lo + len(r):
            return lo, lo + len(r)
        lo += len(r)
    raise IndexError(index)


def _rebuild(g: PolyGeom, verts: np.ndarray) -> PolyGeom:
    it = iter(range(len(verts)))
    return g.map_rings(lambda r: verts[[next(it) for _ in range(len(r))]])


def gen_relation_dataset(n_per_relation: int, sliver_fraction: float = 0.0,
                         vertex_budget: int = DEFAULT_BUDGET, seed: int = 0,
                         magnitude: float = DEFAULT_SLIVER_MAGNITUDE) -> list[RelationSample]:
    """``n_per_relation`` pairs per relation; sample ``i`` has relation ``RELATIONS[i % 9]``.

    Exactly ``round(sliver_fraction * n_per_relation)`` isPartOf pairs,
    chosen by a seeded permutation, are passed through ``sliver_perturb``.
    """
    if not 0 <= sliver_fraction <= 1:
        raise ValueError("sliver_fraction must lie in [0, 1]")
    if n_per_relation < 1:
        raise ValueError("n_per_relation must be at least 1")
    n_sliver = int(round(sliver_fraction * n_per_relation))
    picks = np.random.default_rng([seed, 2**31]).permutation(n_per_relation)[:n_sliver]
    sliver_rank = set(picks.tolist())
    out = []
    nrel = len(RELATIONS)
    for i in range(n_per_relation * nrel):
        rng = np.random.default_rng([seed, i])
        rel = RELATIONS[i % nrel]
        if rel == "isPartOf":
            sub, obj = _contained_pair(rng, vertex_budget)
            sliver = (i // nrel) in sliver_rank
            if sliver:
                sub = sliver_perturb(sub, obj, magnitude, rng)
        else:
            sub, obj = _directional_pair(rel, rng, vertex_budget)
            sliver = False
        out.append(RelationSample(f"rel-{i:06d}", sub, obj, rel, sliver))
    return out


# ---------------------------------------------------------------------------
# NDJSON

def shape_to_json(s: ShapeSample) -> dict:
    return {"id": s.id, "label": s.label, "wkt": serialize_wkt(s.geom)}


def relation_to_json(s: RelationSample) -> dict:
    return {"id": s.id, "relation": s.relation, "subject_wkt": serialize_wkt(s.subject),
            "object_wkt": serialize_wkt(s.object), "sliver": s.sliver}


def write_ndjson(samples, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in samples:
            rec = shape_to_json(s) if isinstance(s, ShapeSample) else relation_to_json(s)
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_ndjson(path) -> list:
    """Load shape or relation samples; the record keys decide the kind."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if "wkt" in rec:
                    out.append(ShapeSample(str(rec["id"]), int(rec["label"]), parse_wkt(rec["wkt"])))
                else:
                    out.append(RelationSample(
                        str(rec["id"]), parse_wkt(rec["subject_wkt"]), parse_wkt(rec["object_wkt"]),
                        str(rec["relation"]), bool(rec.get("sliver", False)),
                    ))
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad record: {exc}") from exc
    kinds = {type(s) for s in out}
    if len(kinds) > 1:
        raise ValueError(f"{path}: mixes shape and relation records")
    return out
