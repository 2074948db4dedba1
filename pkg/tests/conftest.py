import numpy as np
import pytest

from polyenc.datagen import make_shape
from polyenc.geometry import NUFT_SPACE, PolyGeom, normalize_unit


def square(x0=0.0, y0=0.0, side=2.0):
    return np.array([[x0, y0], [x0 + side, y0], [x0 + side, y0 + side], [x0, y0 + side]])


def square_with_hole():
    """2x2 square with a centered 1x1 clockwise hole."""
    return PolyGeom.from_rings(square(), [square(0.5, 0.5, 1.0)[::-1]])


def random_geoms(n, seed=0, budget=48, normalized=False):
    gs = [make_shape(i % 5, np.random.default_rng([seed, i]), budget) for i in range(n)]
    if normalized:
        gs = [normalize_unit([g], NUFT_SPACE)[0][0] for g in gs]
    return gs


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
