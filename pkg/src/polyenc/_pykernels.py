"""Pure numpy implementations of the hot kernels.

These are the fallback used when the compiled ``_ckernels`` extension is
unavailable (or when ``POLYENC_PURE=1``). Signatures and semantics match the
Cython versions exactly; ``tests/test_kernels.py`` cross-checks the two.
"""
import numpy as np

DEGENERATE_DET = 1e-12
SERIES_SPREAD = 1e-3

# point classification codes returned by points_in_ring
OUTSIDE, INSIDE, BOUNDARY = 0, 1, 2


def _phase(x):
    return np.cos(x) - 1j * np.sin(x)


def _expm1_over(theta):
    # (exp(-i*theta) - 1) / theta, finite at theta = 0
    half = np.sinc(theta / (2 * np.pi))
    return -(theta / 2) * half * half - 1j * np.sinc(theta / np.pi)


def nuft_triangles(p1, p2, rho, omega):
    """Fourier transform of a signed triangle fan around the origin.

    Each row ``n`` of ``p1``/``p2`` is an oriented edge; together with the
    origin it spans a triangle carrying constant density ``rho[n]``. Returns
    ``sum_n rho_n * integral_{T_n} exp(-i <w_k, x>) dx`` (signed by the edge
    orientation) for every angular frequency ``w_k`` in ``omega``.

    The closed form is ``-det_n`` times the second divided difference of
    ``exp(-i s)`` over the three phases ``{0, <w,x1>, <w,x2>}``; it is
    evaluated by recursion from the widest-spread pair, falling back to a
    Taylor expansion about the mean phase when all three nearly coincide.
    """
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64).reshape(-1, 2)
    det = p1[:, 0] * p2[:, 1] - p2[:, 0] * p1[:, 1]
    live = np.abs(det) >= DEGENERATE_DET
    if not np.any(live):
        return np.zeros(len(omega), dtype=np.complex128)
    p1, p2, weight = p1[live], p2[live], -(det[live] * rho[live])

    a = omega @ p1.T
    b = omega @ p2.T
    phases = np.sort(np.stack([np.zeros_like(a), a, b]), axis=0)
    lo, mid, hi = phases
    spread = hi - lo

    wide = spread >= SERIES_SPREAD
    safe = np.where(wide, spread, 1.0)
    upper = _phase(mid) * _expm1_over(hi - mid)
    lower = _phase(lo) * _expm1_over(mid - lo)
    dd = (upper - lower) / safe

    center = (lo + mid + hi) / 3.0
    dev = phases - center
    q2 = np.sum(dev * dev, axis=0)
    q3 = np.sum(dev * dev * dev, axis=0)
    series = _phase(center) * (-0.5 + q2 / 48.0 - 1j * q3 / 360.0)

    dd = np.where(wide, dd, series)
    return dd @ weight


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _on_segment(ax, ay, bx, by, px, py):
    return (
        (np.minimum(ax, bx) <= px) & (px <= np.maximum(ax, bx))
        & (np.minimum(ay, by) <= py) & (py <= np.maximum(ay, by))
    )


def ring_self_intersections(ring):
    """Return an ``(k, 2)`` array of intersecting edge index pairs ``i < j``.

    Edge ``i`` joins vertex ``i`` to ``i + 1`` (cyclically). Adjacent edges
    only count when they fold back onto each other.
    """
    r = np.asarray(ring, dtype=np.float64)
    n = len(r)
    a = r
    b = np.roll(r, -1, axis=0)
    i, j = np.triu_indices(n, k=1)
    adjacent = (j == i + 1) | ((i == 0) & (j == n - 1))

    ax, ay, bx, by = a[i, 0], a[i, 1], b[i, 0], b[i, 1]
    cx, cy, dx, dy = a[j, 0], a[j, 1], b[j, 0], b[j, 1]
    o1 = _orient(ax, ay, bx, by, cx, cy)
    o2 = _orient(ax, ay, bx, by, dx, dy)
    o3 = _orient(cx, cy, dx, dy, ax, ay)
    o4 = _orient(cx, cy, dx, dy, bx, by)
    hit = ((o1 > 0) != (o2 > 0)) & (o1 != 0) & (o2 != 0) \
        & ((o3 > 0) != (o4 > 0)) & (o3 != 0) & (o4 != 0)
    hit |= (o1 == 0) & _on_segment(ax, ay, bx, by, cx, cy)
    hit |= (o2 == 0) & _on_segment(ax, ay, bx, by, dx, dy)
    hit |= (o3 == 0) & _on_segment(cx, cy, dx, dy, ax, ay)
    hit |= (o4 == 0) & _on_segment(cx, cy, dx, dy, bx, by)

    # adjacent edges share a vertex by construction; flag only a fold-back
    ux, uy = bx - ax, by - ay
    vx, vy = dx - cx, dy - cy
    cross = ux * vy - uy * vx
    dot = ux * vx + uy * vy
    folded = (cross == 0) & (dot < 0)
    hit = np.where(adjacent, folded, hit)
    return np.stack([i[hit], j[hit]], axis=1)


def rings_cross(ring_a, ring_b):
    """True if any edge of ``ring_a`` properly crosses an edge of ``ring_b``.

    Touching at a vertex or along a collinear stretch is not a crossing.
    """
    ra = np.asarray(ring_a, dtype=np.float64)
    rb = np.asarray(ring_b, dtype=np.float64)
    a, b = ra[:, None, :], np.roll(ra, -1, axis=0)[:, None, :]
    c, d = rb[None, :, :], np.roll(rb, -1, axis=0)[None, :, :]
    o1 = _orient(a[..., 0], a[..., 1], b[..., 0], b[..., 1], c[..., 0], c[..., 1])
    o2 = _orient(a[..., 0], a[..., 1], b[..., 0], b[..., 1], d[..., 0], d[..., 1])
    o3 = _orient(c[..., 0], c[..., 1], d[..., 0], d[..., 1], a[..., 0], a[..., 1])
    o4 = _orient(c[..., 0], c[..., 1], d[..., 0], d[..., 1], b[..., 0], b[..., 1])
    return bool(np.any((o1 * o2 < 0) & (o3 * o4 < 0)))


def points_in_ring(points, ring):
    """Classify points against a simple ring: 0 outside, 1 inside, 2 boundary."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    r = np.asarray(ring, dtype=np.float64)
    px, py = p[:, 0:1], p[:, 1:2]
    ax, ay = r[None, :, 0], r[None, :, 1]
    s = np.roll(r, -1, axis=0)
    bx, by = s[None, :, 0], s[None, :, 1]

    o = _orient(ax, ay, bx, by, px, py)
    on_edge = (o == 0) & _on_segment(ax, ay, bx, by, px, py)
    upward = (ay <= py) & (by > py) & (o > 0)
    downward = (ay > py) & (by <= py) & (o < 0)
    winding = upward.sum(axis=1) - downward.sum(axis=1)

    out = np.where(winding != 0, INSIDE, OUTSIDE).astype(np.int8)
    out[on_edge.any(axis=1)] = BOUNDARY
    return out
