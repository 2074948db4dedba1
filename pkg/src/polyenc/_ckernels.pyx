# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, fabs

cnp.import_array()

cdef double DEGENERATE_DET = 1e-12
cdef double SERIES_SPREAD = 1e-3


cdef inline double _sinc(double x) noexcept nogil:
    # sin(x)/x
    if fabs(x) < 1e-8:
        return 1.0 - x * x / 6.0
    return sin(x) / x


cdef inline void _expm1_over(double theta, double* re, double* im) noexcept nogil:
    cdef double h = _sinc(0.5 * theta)
    re[0] = -0.5 * theta * h * h
    im[0] = -_sinc(theta)


cdef double CLOSE_GAP = 0.125


cdef inline void _pair(double x, double cx, double sx, double y, double cy, double sy,
                       double* re, double* im) noexcept nogil:
    # first divided difference (e(y) - e(x)) / (y - x) of e(s) = exp(-i s);
    # (cx, sx) = (cos x, sin x), likewise for y
    cdef double gap = y - x, er, ei
    if fabs(gap) >= CLOSE_GAP:
        re[0] = (cy - cx) / gap
        im[0] = (sx - sy) / gap
    else:
        _expm1_over(gap, &er, &ei)
        re[0] = cx * er + sx * ei
        im[0] = cx * ei - sx * er


cdef inline void _divdiff(double a, double ca, double sa, double b, double cb, double sb,
                          double* re, double* im) noexcept nogil:
    # second divided difference of exp(-i s) over {0, a, b}
    cdef double lo = 0.0, clo = 1.0, slo = 0.0
    cdef double mid = a, cmid = ca, smid = sa
    cdef double hi = b, chi = cb, shi = sb
    cdef double t
    if mid < lo:
        t = lo; lo = mid; mid = t
        t = clo; clo = cmid; cmid = t
        t = slo; slo = smid; smid = t
    if hi < mid:
        t = mid; mid = hi; hi = t
        t = cmid; cmid = chi; chi = t
        t = smid; smid = shi; shi = t
        if mid < lo:
            t = lo; lo = mid; mid = t
            t = clo; clo = cmid; cmid = t
            t = slo; slo = smid; smid = t
    cdef double spread = hi - lo
    cdef double ur, ui, lr, li, c, d0, d1, d2, q2, q3, sr, si
    if spread >= SERIES_SPREAD:
        _pair(mid, cmid, smid, hi, chi, shi, &ur, &ui)
        _pair(lo, clo, slo, mid, cmid, smid, &lr, &li)
        re[0] = (ur - lr) / spread
        im[0] = (ui - li) / spread
    else:
        c = (lo + mid + hi) / 3.0
        d0 = lo - c
        d1 = mid - c
        d2 = hi - c
        q2 = d0 * d0 + d1 * d1 + d2 * d2
        q3 = d0 * d0 * d0 + d1 * d1 * d1 + d2 * d2 * d2
        sr = -0.5 + q2 / 48.0
        si = -q3 / 360.0
        re[0] = cos(c) * sr + sin(c) * si
        im[0] = cos(c) * si - sin(c) * sr


def nuft_triangles(p1, p2, rho, omega):
    cdef const double[:, ::1] P1 = np.ascontiguousarray(p1, dtype=np.float64)
    cdef const double[:, ::1] P2 = np.ascontiguousarray(p2, dtype=np.float64)
    cdef const double[::1] R = np.ascontiguousarray(rho, dtype=np.float64)
    cdef const double[:, ::1] W = np.ascontiguousarray(np.asarray(omega, dtype=np.float64).reshape(-1, 2))
    cdef Py_ssize_t m = P1.shape[0], K = W.shape[0], k, n
    out = np.zeros(K, dtype=np.complex128)
    cdef double[::1] acc_re = np.zeros(K)
    cdef double[::1] acc_im = np.zeros(K)
    cdef double[::1] weight = np.empty(m)
    cdef double[::1] pa = np.empty(m), pb = np.empty(m)
    cdef double[::1] pc = np.empty(m), ps = np.empty(m)
    cdef double[::1] qc = np.empty(m), qs = np.empty(m)
    cdef double det, re, im, sre, sim
    for n in range(m):
        det = P1[n, 0] * P2[n, 1] - P2[n, 0] * P1[n, 1]
        weight[n] = 0.0 if fabs(det) < DEGENERATE_DET else -det * R[n]
    with nogil:
        for k in range(K):
            for n in range(m):
                pa[n] = W[k, 0] * P1[n, 0] + W[k, 1] * P1[n, 1]
                pb[n] = W[k, 0] * P2[n, 0] + W[k, 1] * P2[n, 1]
                pc[n] = cos(pa[n])
                ps[n] = sin(pa[n])
                qc[n] = cos(pb[n])
                qs[n] = sin(pb[n])
            sre = 0.0
            sim = 0.0
            for n in range(m):
                if weight[n] == 0.0:
                    continue
                _divdiff(pa[n], pc[n], ps[n], pb[n], qc[n], qs[n], &re, &im)
                sre += weight[n] * re
                sim += weight[n] * im
            acc_re[k] = sre
            acc_im[k] = sim
    out.real = np.asarray(acc_re)
    out.imag = np.asarray(acc_im)
    return out


cdef inline double _orient(double ax, double ay, double bx, double by,
                           double cx, double cy) noexcept nogil:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


cdef inline bint _on_segment(double ax, double ay, double bx, double by,
                             double px, double py) noexcept nogil:
    return (min(ax, bx) <= px <= max(ax, bx)) and (min(ay, by) <= py <= max(ay, by))


cdef inline bint _sgn_differ(double u, double v) noexcept nogil:
    return u != 0.0 and v != 0.0 and ((u > 0.0) != (v > 0.0))


def ring_self_intersections(ring):
    cdef const double[:, ::1] r = np.ascontiguousarray(ring, dtype=np.float64)
    cdef Py_ssize_t n = r.shape[0], i, j, ni, nj
    cdef double ax, ay, bx, by, cx, cy, dx, dy, o1, o2, o3, o4
    cdef bint hit
    pairs = []
    for i in range(n):
        ni = (i + 1) % n
        ax = r[i, 0]; ay = r[i, 1]; bx = r[ni, 0]; by = r[ni, 1]
        for j in range(i + 1, n):
            nj = (j + 1) % n
            cx = r[j, 0]; cy = r[j, 1]; dx = r[nj, 0]; dy = r[nj, 1]
            if j == i + 1 or (i == 0 and j == n - 1):
                hit = ((bx - ax) * (dy - cy) - (by - ay) * (dx - cx) == 0.0
                       and (bx - ax) * (dx - cx) + (by - ay) * (dy - cy) < 0.0)
            else:
                o1 = _orient(ax, ay, bx, by, cx, cy)
                o2 = _orient(ax, ay, bx, by, dx, dy)
                o3 = _orient(cx, cy, dx, dy, ax, ay)
                o4 = _orient(cx, cy, dx, dy, bx, by)
                hit = _sgn_differ(o1, o2) and _sgn_differ(o3, o4)
                hit = hit or (o1 == 0.0 and _on_segment(ax, ay, bx, by, cx, cy))
                hit = hit or (o2 == 0.0 and _on_segment(ax, ay, bx, by, dx, dy))
                hit = hit or (o3 == 0.0 and _on_segment(cx, cy, dx, dy, ax, ay))
                hit = hit or (o4 == 0.0 and _on_segment(cx, cy, dx, dy, bx, by))
            if hit:
                pairs.append((i, j))
    if not pairs:
        return np.zeros((0, 2), dtype=np.int64)
    return np.asarray(pairs, dtype=np.int64)


def rings_cross(ring_a, ring_b):
    cdef const double[:, ::1] ra = np.ascontiguousarray(ring_a, dtype=np.float64)
    cdef const double[:, ::1] rb = np.ascontiguousarray(ring_b, dtype=np.float64)
    cdef Py_ssize_t na = ra.shape[0], nb = rb.shape[0], i, j, ni, nj
    cdef double ax, ay, bx, by, cx, cy, dx, dy
    for i in range(na):
        ni = (i + 1) % na
        ax = ra[i, 0]; ay = ra[i, 1]; bx = ra[ni, 0]; by = ra[ni, 1]
        for j in range(nb):
            nj = (j + 1) % nb
            cx = rb[j, 0]; cy = rb[j, 1]; dx = rb[nj, 0]; dy = rb[nj, 1]
            if (_orient(ax, ay, bx, by, cx, cy) * _orient(ax, ay, bx, by, dx, dy) < 0.0
                    and _orient(cx, cy, dx, dy, ax, ay) * _orient(cx, cy, dx, dy, bx, by) < 0.0):
                return True
    return False


def points_in_ring(points, ring):
    cdef const double[:, ::1] p = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 2))
    cdef const double[:, ::1] r = np.ascontiguousarray(ring, dtype=np.float64)
    cdef Py_ssize_t P = p.shape[0], n = r.shape[0], q, i, ni
    out = np.zeros(P, dtype=np.int8)
    cdef cnp.int8_t[::1] res = out
    cdef double px, py, ax, ay, bx, by, o
    cdef long winding
    cdef bint boundary
    with nogil:
        for q in range(P):
            px = p[q, 0]; py = p[q, 1]
            winding = 0
            boundary = False
            for i in range(n):
                ni = (i + 1) % n
                ax = r[i, 0]; ay = r[i, 1]; bx = r[ni, 0]; by = r[ni, 1]
                o = _orient(ax, ay, bx, by, px, py)
                if o == 0.0 and _on_segment(ax, ay, bx, by, px, py):
                    boundary = True
                    break
                if ay <= py:
                    if by > py and o > 0.0:
                        winding += 1
                elif by <= py and o < 0.0:
                    winding -= 1
            if boundary:
                res[q] = 2
            elif winding != 0:
                res[q] = 1
    return out
