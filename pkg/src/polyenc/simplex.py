"""Auxiliary-node conversion of polygonal geometries into 2-simplex meshes.

Every boundary edge, taken in ring traversal order, is joined to the origin
to form one oriented triangle. Triangles of counterclockwise rings carry
positive signed content and those of clockwise holes negative content, so the
superposed densities reproduce the region with holes cut out.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError, PolyGeom


@dataclass(frozen=True, eq=False)
class SimplexMesh:
    """Vertex matrix ``V`` ((m+1) x 2, origin last), simplices ``E`` (m x 3),
    per-simplex density ``D`` (m x d_d)."""

    V: np.ndarray
    E: np.ndarray
    D: np.ndarray
    j: int = 2

    @property
    def n_simplices(self) -> int:
        return len(self.E)

    def edge_endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(x1, x2)``: the two non-origin vertices of each simplex."""
        return self.V[self.E[:, 0]], self.V[self.E[:, 1]]

    def to_csv(self, path) -> None:
        """Debug dump: one row per simplex with its vertex triplet and density."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "i0", "i1", "i2", "x0", "y0", "x1", "y1", "x2", "y2", "rho"])
            for n, (e, d) in enumerate(zip(self.E, self.D)):
                v = self.V[e]
                w.writerow([n, *e.tolist(), *v.ravel().tolist(), *d.tolist()])


def to_simplex_mesh(g: PolyGeom) -> SimplexMesh:
    rings = [r for _, _, r in g.rings()]
    if not rings:
        raise GeometryError("cannot mesh an empty geometry")
    m = sum(len(r) for r in rings)
    V = np.zeros((m + 1, 2))
    E = np.empty((m, 3), dtype=np.int64)
    start = 0
    for r in rings:
        n = len(r)
        idx = np.arange(start, start + n)
        V[idx] = r
        E[idx, 0] = idx
        E[idx, 1] = np.roll(idx, -1)
        start += n
    E[:, 2] = m
    D = np.ones((m, 1))
    for a in (V, E, D):
        a.setflags(write=False)
    return SimplexMesh(V, E, D)


def signed_content_factor(mesh: SimplexMesh, n: int) -> float:
    """``det([x1, x2])`` for simplex ``n``; twice its signed area."""
    x1 = mesh.V[mesh.E[n, 0]]
    x2 = mesh.V[mesh.E[n, 1]]
    return float(x1[0] * x2[1] - x2[0] * x1[1])


def signed_content_factors(mesh: SimplexMesh) -> np.ndarray:
    x1, x2 = mesh.edge_endpoints()
    return x1[:, 0] * x2[:, 1] - x2[:, 0] * x1[:, 1]


def mesh_signed_area(mesh: SimplexMesh) -> float:
    return float(np.sum(mesh.D[:, 0] * signed_content_factors(mesh)) / 2)
