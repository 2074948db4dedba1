"""Polygonal geometry model, text formats and shape-preserving edits.

A geometry is a tuple of polygon parts; each part is an exterior ring plus
zero or more hole rings. Rings are ``(n, 2)`` float64 arrays without a
repeated closing vertex. Exteriors run counterclockwise and holes clockwise;
``parse_wkt`` and ``parse_geojson`` enforce this on ingest.

Every function here is pure: inputs are never mutated, arrays stored on the
dataclasses are read-only.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from . import kernels


class GeometryError(ValueError):
    """Raised for invalid, degenerate or unsupported geometries."""


class WKTSyntaxError(GeometryError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


def _frozen(points) -> np.ndarray:
    arr = np.array(points, dtype=np.float64).reshape(-1, 2)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Polygon:
    exterior: np.ndarray
    holes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "exterior", _frozen(self.exterior))
        object.__setattr__(self, "holes", tuple(_frozen(h) for h in self.holes))

    @property
    def rings(self) -> tuple:
        return (self.exterior,) + self.holes

    def __eq__(self, other):
        if not isinstance(other, Polygon):
            return NotImplemented
        return len(self.holes) == len(other.holes) and all(
            np.array_equal(a, b) for a, b in zip(self.rings, other.rings)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PolyGeom:
    """A polygon or multipolygon: a non-empty tuple of ``Polygon`` parts."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(p if isinstance(p, Polygon) else Polygon(*p) for p in self.parts)
        object.__setattr__(self, "parts", parts)

    @classmethod
    def from_rings(cls, exterior, holes=()) -> "PolyGeom":
        return cls((Polygon(exterior, tuple(holes)),))

    def rings(self) -> Iterator[tuple[int, int, np.ndarray]]:
        """Yield ``(part_index, ring_index, ring)``; ring 0 is the exterior."""
        for pi, part in enumerate(self.parts):
            for ri, ring in enumerate(part.rings):
                yield pi, ri, ring

    @property
    def n_vertices(self) -> int:
        return sum(len(r) for _, _, r in self.rings())

    @property
    def n_holes(self) -> int:
        return sum(len(p.holes) for p in self.parts)

    def vertices(self) -> np.ndarray:
        return np.concatenate([r for _, _, r in self.rings()], axis=0)

    def map_rings(self, fn) -> "PolyGeom":
        return PolyGeom(tuple(
            Polygon(fn(p.exterior), tuple(fn(h) for h in p.holes)) for p in self.parts
        ))

    def __eq__(self, other):
        if not isinstance(other, PolyGeom):
            return NotImplemented
        return len(self.parts) == len(other.parts) and all(
            a == b for a, b in zip(self.parts, other.parts)
        )

    __hash__ = None


@dataclass(frozen=True)
class AffineTransform:
    """``x -> (x + translate_pre) * scale + translate_post`` with isotropic scale."""

    scale: float
    translate_pre: tuple = (0.0, 0.0)
    translate_post: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.scale > 0:
            raise GeometryError("transform scale must be positive")

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return (p + np.asarray(self.translate_pre)) * self.scale + np.asarray(self.translate_post)

    def invert(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return (p - np.asarray(self.translate_post)) / self.scale - np.asarray(self.translate_pre)

    def apply_geom(self, g: PolyGeom) -> PolyGeom:
        return g.map_rings(self.apply)


# ---------------------------------------------------------------------------
# measures and predicates

def ring_signed_area(ring) -> float:
    """Shoelace area; positive for counterclockwise rings."""
    r = np.asarray(ring, dtype=np.float64)
    x, y = r[:, 0], r[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def geometry_area(g: PolyGeom) -> float:
    total = 0.0
    for part in g.parts:
        total += abs(ring_signed_area(part.exterior))
        total -= sum(abs(ring_signed_area(h)) for h in part.holes)
    return total


def centroid(g: PolyGeom) -> np.ndarray:
    """Area-weighted centroid of the geometry (holes subtract)."""
    acc = np.zeros(2)
    area = 0.0
    for _, _, r in g.rings():
        x, y = r[:, 0], r[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cross = x * yn - xn * y
        a = 0.5 * cross.sum()
        # rings are oriented, so signed sums already subtract holes
        acc += np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / 6.0
        area += a
    if area == 0:
        raise GeometryError("centroid of a zero-area geometry")
    return acc / area


def bounds(gs: Sequence[PolyGeom]) -> tuple[float, float, float, float]:
    pts = np.concatenate([g.vertices() for g in gs], axis=0)
    return (float(pts[:, 0].min()), float(pts[:, 1].min()),
            float(pts[:, 0].max()), float(pts[:, 1].max()))


def enforce_orientation(g: PolyGeom) -> PolyGeom:
    """Exteriors counterclockwise, holes clockwise; idempotent."""
    parts = []
    for part in g.parts:
        ext = part.exterior if ring_signed_area(part.exterior) > 0 else part.exterior[::-1]
        holes = tuple(h if ring_signed_area(h) < 0 else h[::-1] for h in part.holes)
        parts.append(Polygon(ext, holes))
    return PolyGeom(tuple(parts))


def points_in_geometry(points, g: PolyGeom) -> np.ndarray:
    """Vectorised ``point_in_polygon``; boundary points count as inside."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    inside = np.zeros(len(pts), dtype=bool)
    for part in g.parts:
        in_part = kernels.points_in_ring(pts, part.exterior) != kernels.OUTSIDE
        for hole in part.holes:
            in_part &= kernels.points_in_ring(pts, hole) != kernels.INSIDE
        inside |= in_part
    return inside


def point_in_polygon(p, g: PolyGeom) -> bool:
    return bool(points_in_geometry(np.asarray(p, dtype=np.float64)[None, :], g)[0])


def validate(g: PolyGeom) -> list[str]:
    """Return a list of human-readable invariant violations (empty if valid)."""
    issues = []
    if not g.parts:
        return ["geometry has no parts"]
    for pi, ri, r in g.rings():
        where = f"part {pi} ring {ri}"
        if len(r) < 3:
            issues.append(f"{where}: fewer than 3 vertices")
            continue
        if not np.all(np.isfinite(r)):
            issues.append(f"{where}: non-finite coordinate")
            continue
        if np.array_equal(r[0], r[-1]):
            issues.append(f"{where}: duplicate closing vertex")
        if np.any(np.all(r[1:] == r[:-1], axis=1)):
            issues.append(f"{where}: consecutive duplicate vertices")
        crossings = kernels.ring_self_intersections(r)
        if len(crossings):
            i, j = crossings[0]
            issues.append(f"{where}: self-intersection between edges {i} and {j}")
        area = ring_signed_area(r)
        if ri == 0 and not area > 0:
            issues.append(f"{where}: exterior is not counterclockwise")
        if ri > 0 and not area < 0:
            issues.append(f"{where}: hole is not clockwise")
    if issues:
        return issues
    for pi, part in enumerate(g.parts):
        for hi, hole in enumerate(part.holes, start=1):
            outside = kernels.points_in_ring(hole, part.exterior) == kernels.OUTSIDE
            if outside.any() or kernels.rings_cross(hole, part.exterior):
                issues.append(f"part {pi} ring {hi}: hole not inside exterior")
        for a in range(len(part.holes)):
            for b in range(a + 1, len(part.holes)):
                ha, hb = part.holes[a], part.holes[b]
                if (kernels.rings_cross(ha, hb)
                        or (kernels.points_in_ring(ha, hb) == kernels.INSIDE).any()
                        or (kernels.points_in_ring(hb, ha) == kernels.INSIDE).any()):
                    issues.append(f"part {pi}: holes {a + 1} and {b + 1} overlap")
    return issues


def is_valid(g: PolyGeom) -> bool:
    return not validate(g)


# ---------------------------------------------------------------------------
# text formats

def _clean_ring(points: list, offset: int = 0) -> np.ndarray:
    r = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(r) > 1 and np.array_equal(r[0], r[-1]):
        r = r[:-1]
    if len(r):
        keep = np.ones(len(r), dtype=bool)
        keep[1:] = np.any(r[1:] != r[:-1], axis=1)
        r = r[keep]
    if len(r) < 3:
        raise GeometryError(f"degenerate ring with fewer than 3 distinct points (byte offset {offset})")
    return r


def _ingest(parts: list, check: bool) -> PolyGeom:
    if not parts:
        raise GeometryError("empty geometry")
    g = enforce_orientation(PolyGeom(tuple(Polygon(rings[0], tuple(rings[1:])) for rings in parts)))
    if check:
        issues = validate(g)
        if issues:
            raise GeometryError("invalid geometry: " + "; ".join(issues))
    return g


_NUMBER = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")
_WORD = re.compile(r"[A-Za-z]+")


class _WKTReader:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def offset(self, pos=None) -> int:
        return len(self.text[: self.pos if pos is None else pos].encode("utf-8"))

    def fail(self, message: str):
        raise WKTSyntaxError(message, self.offset())

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            found = repr(self.peek()) if self.peek() else "end of input"
            self.fail(f"expected {ch!r}, found {found}")
        self.pos += 1

    def word(self) -> str:
        self.skip()
        m = _WORD.match(self.text, self.pos)
        if not m:
            self.fail("expected geometry keyword")
        self.pos = m.end()
        return m.group().upper()

    def number(self) -> float:
        self.skip()
        m = _NUMBER.match(self.text, self.pos)
        if not m:
            self.fail("expected number")
        self.pos = m.end()
        return float(m.group())

    def ring(self):
        start = self.offset()
        self.expect("(")
        pts = []
        while True:
            x = self.number()
            y = self.number()
            if self.peek() not in (",", ")"):
                self.fail("expected ',' or ')' after coordinate pair")
            pts.append((x, y))
            if self.peek() == ",":
                self.pos += 1
                continue
            self.expect(")")
            return pts, start

    def polygon(self):
        self.expect("(")
        rings = [self.ring()]
        while self.peek() == ",":
            self.pos += 1
            rings.append(self.ring())
        self.expect(")")
        return rings

    def is_empty(self) -> bool:
        self.skip()
        if self.text[self.pos:self.pos + 5].upper() == "EMPTY":
            self.pos += 5
            return True
        return False


def parse_wkt(text: str, check: bool = True) -> PolyGeom:
    """Parse a ``POLYGON`` or ``MULTIPOLYGON`` well-known-text string.

    Rings are cleaned (closing duplicate and repeated vertices dropped) and
    reoriented. With ``check`` the result must pass :func:`validate`.
    """
    rd = _WKTReader(text)
    kind = rd.word()
    if kind not in ("POLYGON", "MULTIPOLYGON"):
        raise WKTSyntaxError(f"unsupported geometry type {kind}", 0)
    if rd.is_empty():
        raise GeometryError("empty geometry")
    if kind == "POLYGON":
        parts = [rd.polygon()]
    else:
        rd.expect("(")
        parts = [rd.polygon()]
        while rd.peek() == ",":
            rd.pos += 1
            parts.append(rd.polygon())
        rd.expect(")")
    if rd.peek():
        rd.fail("trailing characters")
    # rings are cleaned only once the whole text has parsed, so syntax errors win
    return _ingest([[_clean_ring(*r) for r in rings] for rings in parts], check)


def _fmt(v: float) -> str:
    return "%.17g" % v


def _ring_wkt(r: np.ndarray) -> str:
    return "(" + ",".join(f"{_fmt(x)} {_fmt(y)}" for x, y in r) + ")"


def _poly_wkt(p: Polygon) -> str:
    return "(" + ",".join(_ring_wkt(r) for r in p.rings) + ")"


def serialize_wkt(g: PolyGeom) -> str:
    """WKT without closing vertices, 17 significant digits per coordinate."""
    if len(g.parts) == 1:
        return "POLYGON" + _poly_wkt(g.parts[0])
    return "MULTIPOLYGON(" + ",".join(_poly_wkt(p) for p in g.parts) + ")"


def parse_geojson(obj, check: bool = True) -> PolyGeom:
    """Read a GeoJSON Polygon/MultiPolygon (or a Feature wrapping one)."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    if obj.get("type") == "Feature":
        obj = obj.get("geometry") or {}
    kind = obj.get("type")
    coords = obj.get("coordinates")
    if kind == "Polygon":
        polys = [coords]
    elif kind == "MultiPolygon":
        polys = coords
    else:
        raise GeometryError(f"unsupported GeoJSON type {kind!r}")
    if not polys:
        raise GeometryError("empty geometry")
    parts = []
    for poly in polys:
        if not poly:
            raise GeometryError("empty polygon")
        parts.append([_clean_ring([c[:2] for c in ring]) for ring in poly])
    return _ingest(parts, check)


# ---------------------------------------------------------------------------
# normalization, resampling, simplification

CENTERED_UNIT = "centered_unit"
NUFT_SPACE = "nuft_space"


def normalize_unit(gs: Sequence[PolyGeom], target: str = NUFT_SPACE):
    """Map geometries with one shared transform from their joint bounding box.

    The box center goes to the origin and the larger half-extent to 1, giving
    ``[-1, 1]^2``; ``nuft_space`` then shifts by ``(1, 1)`` into ``[0, 2]^2``.
    Returns ``(transformed, transform)``.
    """
    if target not in (CENTERED_UNIT, NUFT_SPACE):
        raise ValueError(f"unknown normalization target {target!r}")
    if not gs:
        raise GeometryError("nothing to normalize")
    x0, y0, x1, y1 = bounds(gs)
    half = max(x1 - x0, y1 - y0) / 2
    if not half > 0:
        raise GeometryError("zero-extent bounding box")
    tf = AffineTransform(
        scale=1.0 / half,
        translate_pre=(-(x0 + x1) / 2, -(y0 + y1) / 2),
        translate_post=(1.0, 1.0) if target == NUFT_SPACE else (0.0, 0.0),
    )
    return [tf.apply_geom(g) for g in gs], tf


def resample_ring(ring, n: int) -> np.ndarray:
    """Upsample to ``n`` vertices, keeping every original vertex.

    Extra vertices are allotted to edges in proportion to edge length
    (largest remainder, ties to the lower edge index) and spaced evenly
    within each edge.
    """
    r = np.asarray(ring, dtype=np.float64)
    m = len(r)
    if n < m:
        raise GeometryError(f"cannot resample a {m}-vertex ring down to {n}")
    extra = n - m
    if extra == 0:
        return r.copy()
    nxt = np.roll(r, -1, axis=0)
    lengths = np.hypot(*(nxt - r).T)
    quota = extra * lengths / lengths.sum()
    counts = np.floor(quota).astype(int)
    remainder = quota - counts
    order = sorted(range(m), key=lambda i: (-remainder[i], i))
    for i in order[: extra - counts.sum()]:
        counts[i] += 1
    out = []
    for i in range(m):
        out.append(r[i])
        k = counts[i]
        if k:
            t = np.arange(1, k + 1)[:, None] / (k + 1)
            out.extend(r[i] + t * (nxt[i] - r[i]))
    return np.asarray(out)


def allot_budget(g: PolyGeom, budget: int) -> list[int]:
    """Split a total vertex budget over rings proportionally to perimeter."""
    rings = [r for _, _, r in g.rings()]
    sizes = np.array([len(r) for r in rings])
    if budget < sizes.sum():
        raise GeometryError(f"budget {budget} below current vertex count {sizes.sum()}")
    perim = np.array([np.hypot(*(np.roll(r, -1, axis=0) - r).T).sum() for r in rings])
    quota = budget * perim / perim.sum()
    counts = np.maximum(np.floor(quota).astype(int), sizes)
    while counts.sum() > budget:
        slack = np.where(counts > sizes, counts - quota, -np.inf)
        counts[int(np.argmax(slack))] -= 1
    remainder = quota - counts
    for i in sorted(range(len(rings)), key=lambda i: (-remainder[i], i))[: budget - counts.sum()]:
        counts[i] += 1
    return counts.tolist()


def resample_geometry(g: PolyGeom, budget: int) -> PolyGeom:
    """Resample every ring so the geometry has exactly ``budget`` vertices."""
    counts = iter(allot_budget(g, budget))
    return g.map_rings(lambda r: resample_ring(r, next(counts)))


def _seg_dist(pts, a, b):
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0:
        return np.hypot(*(pts - a).T)
    t = np.clip((pts - a) @ ab / denom, 0.0, 1.0)
    return np.hypot(*(pts - (a + t[:, None] * ab)).T)


def _dp_chain(pts: np.ndarray, tol: float) -> np.ndarray:
    keep = np.zeros(len(pts), dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, len(pts) - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        d = _seg_dist(pts[i + 1:j], pts[i], pts[j])
        k = int(np.argmax(d))
        if d[k] > tol:
            k += i + 1
            keep[k] = True
            stack.append((i, k))
            stack.append((k, j))
    return keep


def douglas_peucker_ring(ring, tol: float) -> np.ndarray:
    """Douglas-Peucker on a closed ring; always keeps at least 3 vertices.

    The ring is split at vertex 0 and the vertex farthest from it; the vertex
    farthest from that chord is always retained so the result has area.
    """
    r = np.asarray(ring, dtype=np.float64)
    n = len(r)
    if n <= 3:
        return r.copy()
    far = int(np.argmax(np.hypot(*(r - r[0]).T)))
    chord = _seg_dist(r, r[0], r[far])
    chord[[0, far]] = -1
    third = int(np.argmax(chord))
    anchors = sorted({0, far, third})
    keep = np.zeros(n, dtype=bool)
    for s, e in zip(anchors, anchors[1:] + [n]):
        idx = np.arange(s, e + 1) % n
        keep[idx[_dp_chain(r[idx], tol)]] = True
    return r[keep]


def _simplify_at(g: PolyGeom, tol: float) -> PolyGeom:
    return g.map_rings(lambda r: douglas_peucker_ring(r, tol))


def simplify(g: PolyGeom, n_target: int, return_tolerance: bool = False):
    """Douglas-Peucker with the smallest tolerance meeting a vertex budget.

    The tolerance is found by bisection over ``[0, bbox diagonal]``. If the
    result is invalid the tolerance is raised in 5% steps until it is valid.
    """
    n_rings = sum(1 for _ in g.rings())
    if n_target < 3 * n_rings:
        raise GeometryError(f"budget {n_target} leaves some ring with fewer than 3 vertices")
    if g.n_vertices <= n_target:
        return (g, 0.0) if return_tolerance else g
    x0, y0, x1, y1 = bounds([g])
    lo, hi = 0.0, float(np.hypot(x1 - x0, y1 - y0))
    if _simplify_at(g, hi).n_vertices > n_target:
        raise GeometryError(f"cannot reach {n_target} vertices")
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _simplify_at(g, mid).n_vertices <= n_target:
            hi = mid
        else:
            lo = mid
    tol = hi
    out = _simplify_at(g, tol)
    limit = float(np.hypot(x1 - x0, y1 - y0))
    while validate(out):
        tol *= 1.05
        if tol > limit:
            raise GeometryError("simplification cannot keep the geometry valid")
        out = _simplify_at(g, tol)
    return (out, tol) if return_tolerance else out


# ---------------------------------------------------------------------------
# shape-preserving modifications

def _replace_ring(g: PolyGeom, part: int, ring: int, new) -> PolyGeom:
    parts = list(g.parts)
    rings = list(parts[part].rings)
    rings[ring] = new
    parts[part] = Polygon(rings[0], tuple(rings[1:]))
    return PolyGeom(tuple(parts))


def loop_shift(g: PolyGeom, part: int, ring: int, s: int) -> PolyGeom:
    """Rotate one ring's vertex list left by ``s`` (start from vertex ``s``)."""
    if not 0 <= part < len(g.parts):
        raise IndexError(f"part {part} out of range")
    rings = g.parts[part].rings
    if not 0 <= ring < len(rings):
        raise IndexError(f"ring {ring} out of range")
    r = rings[ring]
    return _replace_ring(g, part, ring, np.roll(r, -(s % len(r)), axis=0))


def insert_trivial_vertices(g: PolyGeom, k: int, rng: np.random.Generator) -> PolyGeom:
    """Insert ``k`` vertices at uniform positions on length-weighted random edges."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if k == 0:
        return g
    rings = list(g.rings())
    seg_a = np.concatenate([r for _, _, r in rings])
    seg_b = np.concatenate([np.roll(r, -1, axis=0) for _, _, r in rings])
    lengths = np.hypot(*(seg_b - seg_a).T)
    edges = rng.choice(len(lengths), size=k, p=lengths / lengths.sum())
    params: dict[int, list] = {}
    for e in edges:
        t = 0.0
        while t == 0.0 or t in params.get(int(e), ()):
            t = rng.random()
        params.setdefault(int(e), []).append(t)

    offset = 0
    out = g
    for pi, ri, r in rings:
        new = []
        for i in range(len(r)):
            new.append(r[i])
            for t in sorted(params.get(offset + i, ())):
                new.append(seg_a[offset + i] + t * (seg_b[offset + i] - seg_a[offset + i]))
        offset += len(r)
        out = _replace_ring(out, pi, ri, np.asarray(new))
    return out


def permute_parts(g: PolyGeom, perm: Sequence[int]) -> PolyGeom:
    perm = [int(i) for i in perm]
    if sorted(perm) != list(range(len(g.parts))):
        raise ValueError(f"{perm} is not a permutation of {len(g.parts)} parts")
    return PolyGeom(tuple(g.parts[i] for i in perm))


def holes_to_parts(g: PolyGeom) -> PolyGeom:
    """Detach every hole into a new counterclockwise part appended at the end."""
    kept = [Polygon(p.exterior) for p in g.parts]
    detached = [Polygon(h[::-1]) for p in g.parts for h in p.holes]
    return PolyGeom(tuple(kept + detached))
