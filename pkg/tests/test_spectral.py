import numpy as np
import pytest

from conftest import random_geoms, square
from oracles import random_triangle_case, triangle_quadrature
from polyenc import kernels
from polyenc.geometry import (
    GeometryError, PolyGeom, geometry_area, holes_to_parts, insert_trivial_vertices,
    loop_shift, permute_parts, points_in_geometry,
)
from polyenc.propcheck import hole_share
from polyenc.simplex import to_simplex_mesh
from polyenc.spectral import (
    FeatureStandardizer, FrequencyMap, SpectralVector, flatten_spectrum, geometric_grid,
    ifft_rasterize, linear_grid, nuft, pca_fit, pca_project, pca_reconstruct, pixel_centers,
)


def single_map(w):
    """A one-frequency map in units where the angular frequency is pi * w."""
    return FrequencyMap("linear", 1, 1, [w[0]], [w[1]])


# --- frequency maps ---------------------------------------------------------

def test_linear_grid_examples():
    f = linear_grid(24)
    np.testing.assert_array_equal(f.wx, np.arange(-12, 12))
    np.testing.assert_array_equal(f.wy, np.arange(0, 13))
    assert f.n_w == 312 == len(f.freqs)
    f = linear_grid(3)
    np.testing.assert_array_equal(f.wx, [-1, 0, 1])
    np.testing.assert_array_equal(f.wy, [0, 1])
    assert f.n_w == 6
    with pytest.raises(ValueError):
        linear_grid(1)


def test_linear_grid_row_major():
    f = linear_grid(4)
    np.testing.assert_array_equal(f.freqs[:4], [[-2, 0], [-2, 1], [-2, 2], [-1, 0]])
    assert f.n_wy == 4 // 2 + 1


def test_geometric_grid_examples():
    f = geometric_grid(7, 1, 4)
    np.testing.assert_allclose(f.wx, [-4, -2, -1, 0, 1, 2, 4])
    np.testing.assert_allclose(f.wy, [0, 1, 2, 4])
    assert f.n_w == 28
    for n, lo, hi in ((24, 0.5, 12.0), (32, 0.8, 16.0)):
        f = geometric_grid(n, lo, hi)
        assert len(f.wx) == n and f.n_wy == n // 2 + 1
        pos = f.wx[f.wx > 0]
        assert pos.min() == pytest.approx(lo)
        np.testing.assert_allclose(pos[1:] / pos[:-1], (hi / lo) ** (1 / (n // 2 - 1)))
        np.testing.assert_allclose(f.wy[1:][-1], hi)
    for bad in ((2, 1, 4), (7, 0, 4), (7, 4, 1)):
        with pytest.raises(ValueError):
            geometric_grid(*bad)


# --- NUFT -------------------------------------------------------------------

def test_dc_of_square():
    s = nuft(to_simplex_mesh(PolyGeom.from_rings(square())), linear_grid(8))
    assert s.dc() == 4 + 0j


def test_degenerate_mesh_is_zero():
    # every edge of a ring through the origin along one ray is radial
    g = PolyGeom.from_rings([(0.5, 0.5), (1.0, 1.0), (1.5, 1.5)])
    s = nuft(to_simplex_mesh(g), geometric_grid(8, 0.5, 4))
    assert np.all(s.values == 0)


def test_coordinates_outside_nuft_space_rejected():
    with pytest.raises(GeometryError):
        nuft(to_simplex_mesh(PolyGeom.from_rings(square(1, 1, 2))), linear_grid(4))


def test_random_triangle_at_pi():
    rng = np.random.default_rng(0)
    tri = rng.uniform(0, 2, (3, 2))
    if (tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1]) < (tri[1, 1] - tri[0, 1]) * (tri[2, 0] - tri[0, 0]):
        tri = tri[::-1]
    got = nuft(to_simplex_mesh(PolyGeom.from_rings(tri)), single_map((1.0, 0.0))).values[0]
    assert abs(got - triangle_quadrature(tri, [np.pi, 0.0])[0]) <= 1e-8


def test_quadrature_equivalence_50_triangles():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        tri, omega, sign = random_triangle_case(rng)
        got = kernels.nuft_triangles(tri, np.roll(tri, -1, 0), np.ones(3), omega)
        # the edge fan over the origin integrates the signed triangle
        worst = max(worst, np.max(np.abs(got - sign * triangle_quadrature(tri, omega))))
    assert worst <= 1e-8


def test_near_coincident_phases_match_quadrature():
    # frequencies nearly orthogonal to an edge put two phases within 1e-9
    tri = np.array([[0.3, 0.4], [1.7, 0.4 + 1e-11], [1.0, 1.8]])
    omega = np.array([[0.0, 5.0], [1e-12, 7.3], [3.0, 1e-10], [4e-10, 4e-10]])
    got = kernels.nuft_triangles(tri, np.roll(tri, -1, 0), np.ones(3), omega)
    assert np.all(np.isfinite(got))
    np.testing.assert_allclose(got, triangle_quadrature(tri, omega), atol=1e-8)


def test_dc_equals_area():
    fmap = geometric_grid(8, 0.5, 4)
    for g in random_geoms(40, seed=9, normalized=True):
        dc = nuft(to_simplex_mesh(g), fmap).dc()
        assert dc.imag == 0 and dc.real == pytest.approx(geometry_area(g), rel=1e-10)


def test_conjugate_symmetry():
    fmap = linear_grid(9)
    axis = fmap.freqs[:, 1] == 0
    for g in random_geoms(10, seed=10, normalized=True):
        v = nuft(to_simplex_mesh(g), fmap).values[axis]
        np.testing.assert_allclose(v, np.conj(v[::-1]), atol=1e-10)


@pytest.mark.parametrize("fmap", [linear_grid(12), geometric_grid(12, 0.5, 6)], ids=["linear", "geometric"])
def test_invariances(fmap):
    rng = np.random.default_rng(3)
    topo_seen = 0
    for g in random_geoms(25, seed=12, normalized=True):
        base = nuft(to_simplex_mesh(g), fmap).values
        scale = np.abs(base).max()
        for pi, ri, r in g.rings():
            g2 = loop_shift(g, pi, ri, int(rng.integers(1, len(r))))
            np.testing.assert_allclose(nuft(to_simplex_mesh(g2), fmap).values, base, rtol=0, atol=1e-9)
        g3 = insert_trivial_vertices(g, int(rng.integers(1, g.n_vertices + 1)), rng)
        np.testing.assert_allclose(nuft(to_simplex_mesh(g3), fmap).values, base, rtol=0, atol=1e-7 * scale)
        if len(g.parts) > 1:
            g4 = permute_parts(g, list(range(len(g.parts)))[::-1])
            np.testing.assert_allclose(nuft(to_simplex_mesh(g4), fmap).values, base, rtol=0, atol=1e-9)
        if g.n_holes and hole_share(g) >= 0.05:
            topo_seen += 1
            a = flatten_spectrum(SpectralVector(base, fmap))
            b = flatten_spectrum(nuft(to_simplex_mesh(holes_to_parts(g)), fmap))
            assert np.linalg.norm(a - b) >= 1e-3
    assert topo_seen > 0


# --- flattening -------------------------------------------------------------

def test_flatten_examples():
    spec = SpectralVector(np.array([1 + 2j, 3 + 0j]), linear_grid(2))
    np.testing.assert_array_equal(flatten_spectrum(spec), [1, 2, 3, 0])
    assert np.linalg.norm(flatten_spectrum(spec, "l2")) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        flatten_spectrum(SpectralVector(np.zeros(2, complex), linear_grid(2)), "l2")
    stats = FeatureStandardizer.fit(np.array([[0, 0, 0, 0], [2, 4, 6, 0]]))
    np.testing.assert_allclose(flatten_spectrum(spec, "batch_stats", stats), [0, 0, 0, 0])
    with pytest.raises(ValueError):
        flatten_spectrum(spec, "batch_stats")


# --- rasterization ----------------------------------------------------------

def test_ifft_dc_only():
    fmap = linear_grid(8)
    vals = np.zeros(fmap.n_w, complex)
    vals[np.flatnonzero(np.all(fmap.freqs == 0, axis=1))] = 3.2
    img = ifft_rasterize(SpectralVector(vals, fmap), 16)
    np.testing.assert_allclose(img.pixels, 0.8, atol=1e-14)
    assert (img.height, img.width) == (16, 16)


def test_ifft_rejects_bad_input():
    with pytest.raises(ValueError):
        ifft_rasterize(SpectralVector(np.zeros(28, complex), geometric_grid(7, 1, 4)), 64)
    with pytest.raises(ValueError):
        ifft_rasterize(SpectralVector(np.zeros(312, complex), linear_grid(24)), 16)


def test_ifft_mass_inside_square():
    g = PolyGeom.from_rings(square(0.5, 0.5, 1.0))
    img = ifft_rasterize(nuft(to_simplex_mesh(g), linear_grid(24)), 64).pixels
    c = pixel_centers(64)
    xx, yy = np.meshgrid(c, c)
    inside = points_in_geometry(np.stack([xx.ravel(), yy.ravel()], 1), g).reshape(64, 64)
    pos = np.clip(img, 0, None)
    assert pos[inside].sum() / pos.sum() >= 0.9


def test_ifft_area_within_two_percent():
    for g in (PolyGeom.from_rings(square(0.5, 0.5, 1.0)),
              PolyGeom.from_rings([(0.4, 0.3), (1.6, 0.5), (1.2, 1.7)])):
        img = ifft_rasterize(nuft(to_simplex_mesh(g), linear_grid(24)), 64).pixels
        assert img.sum() * (2 / 64) ** 2 == pytest.approx(geometry_area(g), rel=0.02)


# --- PCA --------------------------------------------------------------------

def test_pca_line():
    x = np.linspace(-1, 1, 50)
    rows = np.stack([x, 2 * x], 1)
    for target in (0.5, 0.99, 1.0):
        assert pca_fit(rows, target).n_components == 1


def test_pca_isotropic():
    rows = np.random.default_rng(0).standard_normal((4000, 2))
    m = pca_fit(rows, 0.9)
    assert m.n_components == 2
    assert abs(m.explained_ratio[0] - 0.5) <= 0.05


def test_pca_project_reconstruct_and_variance():
    rows = np.random.default_rng(1).standard_normal((200, 6)) @ np.random.default_rng(2).standard_normal((6, 6))
    m = pca_fit(rows, 1.0)
    np.testing.assert_allclose(m.components @ m.components.T, np.eye(6), atol=1e-8)
    assert np.all(np.diff(m.explained_variance) <= 0)
    np.testing.assert_allclose(pca_project(m, m.mean), 0, atol=1e-12)
    z = pca_project(m, rows)
    np.testing.assert_allclose(pca_reconstruct(m, z), rows, atol=1e-8)
    np.testing.assert_allclose(z.var(axis=0, ddof=1), m.explained_variance, rtol=1e-6)
    with pytest.raises(ValueError):
        pca_project(m, np.zeros(5))
    with pytest.raises(ValueError):
        pca_fit(rows[:1], 0.9)
