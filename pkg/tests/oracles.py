"""Independent numerical oracles shared by the unit and acceptance tests."""
import numpy as np


def triangle_quadrature(tri, omega, tol=1e-12):
    """Duffy-mapped Gauss-Legendre integral of exp(-i<w,x>) over a triangle,
    with the order raised until two successive estimates agree to ``tol``."""
    a, b, c = np.asarray(tri, dtype=float)
    jac = abs((b - a)[0] * (c - b)[1] - (b - a)[1] * (c - b)[0])
    prev = None
    for n in range(20, 400, 20):
        t, w = np.polynomial.legendre.leggauss(n)
        t, w = (t + 1) / 2, w / 2
        u, v = np.meshgrid(t, t, indexing="ij")
        wu = np.outer(w, w) * u * jac
        x = a + u[..., None] * (b - a) + (u * v)[..., None] * (c - b)
        est = np.array([np.sum(wu * np.exp(-1j * (x @ om))) for om in np.atleast_2d(omega)])
        if prev is not None and np.max(np.abs(est - prev)) < tol:
            return est
        prev = est
    raise AssertionError("quadrature did not converge")


def random_triangle_case(rng, n_freq=20):
    tri = rng.uniform(0, 2, (3, 2))
    omega = rng.uniform(-12, 12, (n_freq, 2)) * np.pi
    sign = np.sign((tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1])
                   - (tri[1, 1] - tri[0, 1]) * (tri[2, 0] - tri[0, 0]))
    return tri, omega, sign
