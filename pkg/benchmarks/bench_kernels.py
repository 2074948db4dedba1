"""Compare the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from polyenc import kernels
from polyenc.datagen import make_shape
from polyenc.geometry import NUFT_SPACE, normalize_unit
from polyenc.simplex import to_simplex_mesh
from polyenc.spectral import geometric_grid


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    rng = np.random.default_rng(0)
    g = normalize_unit([make_shape(2, rng, 128)], NUFT_SPACE)[0][0]
    x1, x2 = to_simplex_mesh(g).edge_endpoints()
    omega = geometric_grid(24, 0.5, 12.0).omega
    ring = g.parts[0].exterior
    pts = rng.uniform(0, 2, (20_000, 2))
    other = ring[::-1] * 0.5 + 0.5
    return {
        "nuft_triangles (128 simplices x 312 freqs)": lambda k: k.nuft_triangles(x1, x2, np.ones(len(x1)), omega),
        "points_in_ring (20k points)": lambda k: k.points_in_ring(pts, ring),
        "ring_self_intersections": lambda k: k.ring_self_intersections(ring),
        "rings_cross": lambda k: k.rings_cross(ring, other),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    impls = kernels.backends()
    print(f"active backend: {kernels.BACKEND}")
    names = list(impls)
    print(f"{'kernel':46s}" + "".join(f"{n + ' ms':>12s}" for n in names) + f"{'speedup':>10s}")
    for label, fn in cases().items():
        ref = fn(impls["numpy"])
        times = {}
        for n, mod in impls.items():
            out = fn(mod)
            if not np.allclose(out, ref, atol=1e-12):
                raise SystemExit(f"{label}: {n} disagrees with numpy")
            times[n] = _best(lambda: fn(mod), args.repeat)
        speed = f"{times['numpy'] / times['cython']:9.1f}x" if "cython" in times else f"{'n/a':>10s}"
        print(f"{label:46s}" + "".join(f"{1e3 * times[n]:12.3f}" for n in names) + speed)


if __name__ == "__main__":
    main()
