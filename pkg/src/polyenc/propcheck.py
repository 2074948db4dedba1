"""Executable Loop / TriV / ParP / Topo property suites.

Loop: cyclic rotation of every ring's vertex list. TriV: insertion of
vertices on existing edges. ParP: reordering of multipolygon parts. Topo:
detaching holes into separate parts must change the output.
"""
from __future__ import annotations

import numpy as np

from .datagen import make_shape
from .encoders import RESNET1D, SPECTRAL_KINDS, Encoder, EncoderConfig
from .geometry import (
    PolyGeom, geometry_area, holes_to_parts, insert_trivial_vertices, loop_shift,
    normalize_unit, NUFT_SPACE, permute_parts,
)
from .simplex import to_simplex_mesh
from .spectral import FrequencyMap, nuft

EMBED_TOL = 1e-6
TOPO_MIN = 1e-4
TOPO_HOLE_SHARE = 0.05


def corpus(n: int, seed: int, budget: int = 64) -> list[PolyGeom]:
    """Seeded mix cycling blob, star, annulus, two-part and C-shape."""
    return [make_shape(i % 5, np.random.default_rng([seed, i]), budget) for i in range(n)]


def shift_all_rings(g: PolyGeom, rng, even: bool = False) -> PolyGeom:
    out = g
    for pi, ri, r in g.rings():
        s = int(rng.integers(1, len(r)))
        if even:
            s = 2 * int(rng.integers(1, max(2, len(r) // 2)))
        out = loop_shift(out, pi, ri, s)
    return out


def hole_share(g: PolyGeom) -> float:
    holes = sum(abs(geometry_area(PolyGeom.from_rings(h[::-1]))) for p in g.parts for h in p.holes)
    return holes / (geometry_area(g) + holes)


def _variants(g: PolyGeom, rng, even_loop: bool):
    """Yield ``(property, modified)``; the Topo variant only for holed geometries."""
    if not (even_loop and (len(g.parts) > 1 or g.n_holes)):
        yield "loop", shift_all_rings(g, rng, even=even_loop)
    yield "triv", insert_trivial_vertices(g, int(rng.integers(1, g.n_vertices + 1)), rng)
    if len(g.parts) > 1:
        perm = rng.permutation(len(g.parts))
        if np.array_equal(perm, np.arange(len(g.parts))):
            perm = perm[::-1]
        yield "parp", permute_parts(g, perm)
    if g.n_holes and hole_share(g) >= TOPO_HOLE_SHARE:
        yield "topo", holes_to_parts(g)


def _summarize(devs: dict, kind: str) -> dict:
    out = {}
    for prop, vals in devs.items():
        if not vals:
            continue
        if prop == "topo":
            worst = float(min(vals))
            out[prop] = {"n": len(vals), "min_deviation": worst, "threshold": TOPO_MIN,
                         "pass": worst > TOPO_MIN}
        else:
            worst = float(max(vals))
            out[prop] = {"n": len(vals), "max_deviation": worst, "tolerance": EMBED_TOL,
                         "pass": worst <= EMBED_TOL}
    return out


def embedding_suite(encoder: Encoder, geoms, seed: int = 0) -> dict:
    """Max embedding distance per property (min for Topo).

    ResNet1D's net stride is 2, so its Loop check uses even shifts on
    simple polygons; odd shifts are reported separately as ``loop_odd`` for
    information only.
    """
    rng = np.random.default_rng(seed)
    even = encoder.kind == RESNET1D
    devs: dict[str, list] = {"loop": [], "triv": [], "parp": [], "topo": []}
    odd: list = []
    for g in geoms:
        base = encoder.embed([g])[0]
        for prop, h in _variants(g, rng, even):
            devs[prop].append(float(np.linalg.norm(encoder.embed([h])[0] - base)))
        if even and len(g.parts) == 1 and not g.n_holes:
            r = g.parts[0].exterior
            s = 2 * int(rng.integers(0, len(r) // 2)) + 1
            odd.append(float(np.linalg.norm(encoder.embed([loop_shift(g, 0, 0, s)])[0] - base)))
    report = {"encoder": encoder.kind, "n_geometries": len(geoms), "properties": _summarize(devs, encoder.kind)}
    if odd:
        report["loop_odd_max_deviation"] = float(max(odd))
    report["all_pass"] = all(v["pass"] for v in report["properties"].values())
    return report


def untrained_encoder(cfg: EncoderConfig, geoms, seed: int = 0) -> Encoder:
    enc = Encoder(cfg)
    if cfg.kind in SPECTRAL_KINDS:
        enc.fit(enc.featurize_many([enc.normalize(g) for g in geoms]))
    return enc.build(np.random.default_rng(seed))


def spectral_suite(geoms, fmap: FrequencyMap, seed: int = 0) -> dict:
    """Invariance deviations of raw NUFT spectra after normalization to ``[0, 2]^2``.

    Loop and ParP report max absolute coefficient difference, TriV the max
    difference relative to the largest coefficient magnitude, DC the relative
    error against the geometry area, and Topo the minimum max-abs difference.
    """
    rng = np.random.default_rng(seed)
    loop, triv, parp, topo, dc = [], [], [], [], []
    for g in geoms:
        (gn,), _ = normalize_unit([g], NUFT_SPACE)
        base = nuft(to_simplex_mesh(gn), fmap)
        dc.append(abs(base.dc() - geometry_area(gn)) / geometry_area(gn))
        scale = float(np.abs(base.values).max())
        for prop, h in _variants(gn, rng, even_loop=False):
            dev = float(np.abs(nuft(to_simplex_mesh(h), fmap).values - base.values).max())
            {"loop": loop, "parp": parp, "topo": topo}.get(prop, triv).append(
                dev / scale if prop == "triv" else dev)
    return {
        "loop_max_abs": max(loop, default=0.0),
        "triv_max_rel": max(triv, default=0.0),
        "parp_max_abs": max(parp, default=0.0),
        "dc_max_rel": max(dc, default=0.0),
        "topo_min_abs": min(topo, default=float("inf")),
        "counts": {"loop": len(loop), "triv": len(triv), "parp": len(parp), "topo": len(topo)},
    }
