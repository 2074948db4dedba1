"""Frequency maps, the simplex-mesh NUFT, and spectral post-processing.

Frequencies are stored in grid units. The transform evaluates
``exp(-i <w, x>)`` at the angular frequency ``w = angular_scale * freq``;
with the default scale of pi an integer grid frequency is periodic over the
``[0, 2]^2`` normalization box, which is what the inverse DFT in
:func:`ifft_rasterize` relies on.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import GeometryError
from .simplex import SimplexMesh

LINEAR = "linear"
GEOMETRIC = "geometric"

NORM_NONE = "none"
NORM_L2 = "l2"
NORM_BATCH = "batch_stats"


@dataclass(frozen=True, eq=False)
class FrequencyMap:
    kind: str
    n_wx: int
    n_wy: int
    wx: np.ndarray
    wy: np.ndarray
    w_min: float | None = None
    w_max: float | None = None
    angular_scale: float = math.pi
    freqs: np.ndarray = field(init=False)

    def __post_init__(self):
        wx = np.asarray(self.wx, dtype=np.float64)
        wy = np.asarray(self.wy, dtype=np.float64)
        gx, gy = np.meshgrid(wx, wy, indexing="ij")
        freqs = np.stack([gx.ravel(), gy.ravel()], axis=1)
        for name, arr in (("wx", wx), ("wy", wy), ("freqs", freqs)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_w(self) -> int:
        return self.n_wx * self.n_wy

    @property
    def omega(self) -> np.ndarray:
        """Angular frequencies, ``(N_w, 2)``, in map order."""
        return self.freqs * self.angular_scale

    @property
    def map_id(self) -> str:
        if self.kind == LINEAR:
            return f"linear:{self.n_wx}"
        return f"geometric:{self.n_wx}:{self.w_min:g}:{self.w_max:g}"

    def to_config(self) -> dict:
        out = {"kind": self.kind, "N_wx": self.n_wx}
        if self.kind == GEOMETRIC:
            out.update(w_min=self.w_min, w_max=self.w_max)
        return out

    @classmethod
    def from_config(cls, cfg: dict) -> "FrequencyMap":
        if cfg["kind"] == LINEAR:
            return linear_grid(cfg["N_wx"])
        return geometric_grid(cfg["N_wx"], cfg["w_min"], cfg["w_max"])


def _half(n_wx: int) -> int:
    return n_wx // 2


def linear_grid(n_wx: int) -> FrequencyMap:
    """Integer FFT-style grid: ``W_x`` symmetric around 0, ``W_y = {0..U}``."""
    if n_wx < 2:
        raise ValueError("linear grid needs N_wx >= 2")
    u = _half(n_wx)
    wx = np.arange(-u, u + 1) if n_wx % 2 else np.arange(-u, u)
    wy = np.arange(0, u + 1)
    return FrequencyMap(LINEAR, n_wx, len(wy), wx, wy)


def geometric_series(u: int, w_min: float, w_max: float) -> np.ndarray:
    """``w_min * (w_max / w_min) ** (k / (u - 1))`` for ``k = 0..u-1``."""
    if u == 1:
        return np.array([w_min])
    return w_min * (w_max / w_min) ** (np.arange(u) / (u - 1))


def geometric_grid(n_wx: int, w_min: float, w_max: float) -> FrequencyMap:
    """Geometric-series grid mirrored around a zero frequency."""
    if n_wx < 3:
        raise ValueError("geometric grid needs N_wx >= 3")
    if not 0 < w_min < w_max:
        raise ValueError("geometric grid needs 0 < w_min < w_max")
    u = _half(n_wx)
    series = geometric_series(u, w_min, w_max)
    positive = series if n_wx % 2 else series[: u - 1]
    wx = np.concatenate([-series[::-1], [0.0], positive])
    wy = np.concatenate([[0.0], series])
    return FrequencyMap(GEOMETRIC, n_wx, len(wy), wx, wy, float(w_min), float(w_max))


@dataclass(frozen=True, eq=False)
class SpectralVector:
    values: np.ndarray
    fmap: FrequencyMap

    @property
    def map_id(self) -> str:
        return self.fmap.map_id

    def dc(self) -> complex:
        zero = np.flatnonzero(np.all(self.fmap.freqs == 0, axis=1))
        if not len(zero):
            raise KeyError("frequency map has no zero frequency")
        return complex(self.values[zero[0]])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "w_x", "w_y", "re", "im"])
            for k, ((fx, fy), v) in enumerate(zip(self.fmap.freqs, self.values)):
                w.writerow([k, repr(float(fx)), repr(float(fy)), repr(v.real), repr(v.imag)])


COORD_SLACK = 1e-9


def nuft(mesh: SimplexMesh, fmap: FrequencyMap) -> SpectralVector:
    """Fourier transform of the mesh's piecewise-constant density at every map frequency."""
    pts = mesh.V[:-1]
    if pts.size and (pts.min() < -COORD_SLACK or pts.max() > 2 + COORD_SLACK):
        raise GeometryError("mesh coordinates must lie in [0, 2]^2; normalize first")
    x1, x2 = mesh.edge_endpoints()
    values = kernels.nuft_triangles(x1, x2, mesh.D[:, 0], fmap.omega)
    return SpectralVector(values, fmap)


@dataclass
class FeatureStandardizer:
    """Per-feature standardization fitted on training features."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, rows: np.ndarray, floor: float = 1e-12) -> "FeatureStandardizer":
        rows = np.asarray(rows, dtype=np.float64)
        return cls(rows.mean(axis=0), np.maximum(rows.std(axis=0), floor))

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return (v - self.mean) / self.std


def flatten_spectrum(spec: SpectralVector, mode: str = NORM_NONE,
                     stats: FeatureStandardizer | None = None) -> np.ndarray:
    """``[Re F1, Im F1, Re F2, Im F2, ...]`` with optional normalization."""
    v = np.empty(2 * len(spec.values))
    v[0::2] = spec.values.real
    v[1::2] = spec.values.imag
    if mode == NORM_NONE:
        return v
    if mode == NORM_L2:
        norm = np.linalg.norm(v)
        if norm < 1e-15:
            raise ValueError("cannot L2-normalize an all-zero spectrum")
        return v / norm
    if mode == NORM_BATCH:
        if stats is None:
            raise ValueError("batch_stats normalization needs fitted training statistics")
        return stats(v)
    raise ValueError(f"unknown normalization mode {mode!r}")


@dataclass(frozen=True, eq=False)
class RasterImage:
    pixels: np.ndarray

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def pixel_centers(side: int) -> np.ndarray:
    return (np.arange(side) + 0.5) * (2.0 / side)


def ifft_rasterize(spec: SpectralVector, side: int) -> RasterImage:
    """Inverse DFT of a linear-grid spectrum on a ``side x side`` grid over ``[0, 2]^2``.

    ``pixels[iy, ix]`` samples the band-limited density at pixel center
    ``(x_ix, y_iy)``. The missing half plane is the complex conjugate of the
    stored one, so rows with ``w_y > 0`` count twice.
    """
    fmap = spec.fmap
    if fmap.kind != LINEAR:
        raise ValueError("inverse FFT rasterization needs a linear frequency map")
    if side < fmap.n_wx:
        raise ValueError(f"raster side {side} smaller than N_wx={fmap.n_wx}")
    grid = spec.values.reshape(fmap.n_wx, fmap.n_wy)
    weights = np.where(fmap.wy > 0, 2.0, 1.0)
    c = pixel_centers(side)
    ex = np.exp(1j * fmap.angular_scale * np.outer(fmap.wx, c))  # (N_wx, side)
    ey = np.exp(1j * fmap.angular_scale * np.outer(fmap.wy, c))  # (N_wy, side)
    img = (ey.T @ (grid * weights).T @ ex).real / 4.0
    return RasterImage(img)


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    var_target: float
    total_variance: float

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def explained_ratio(self) -> np.ndarray:
        return self.explained_variance / self.total_variance


def pca_fit(rows, var_target: float) -> PcaModel:
    """Eigendecomposition of the sample covariance; keeps the fewest leading
    components whose cumulative variance ratio reaches ``var_target``."""
    x = np.asarray(rows, dtype=np.float64)
    if x.ndim != 2 or len(x) < 2:
        raise ValueError("PCA needs at least 2 rows")
    if not 0 < var_target <= 1:
        raise ValueError("var_target must lie in (0, 1]")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (len(x) - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    total = float(evals.sum())
    if total <= 0:
        raise ValueError("PCA input has zero variance")
    ratio = np.cumsum(evals) / total
    k = int(np.searchsorted(ratio, var_target - 1e-12) + 1)
    k = min(k, len(evals))
    # fix each component's sign so the largest-magnitude entry is positive
    comps = evecs[:, :k].T.copy()
    flip = comps[np.arange(k), np.argmax(np.abs(comps), axis=1)] < 0
    comps[flip] *= -1
    return PcaModel(mean, comps, evals[:k].copy(), float(var_target), total)


def pca_project(model: PcaModel, v) -> np.ndarray:
    """Project one vector or a batch of rows onto the retained components."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != len(model.mean):
        raise ValueError(f"dimension {v.shape[-1]} does not match PCA input {len(model.mean)}")
    return (v - model.mean) @ model.components.T


def pca_reconstruct(model: PcaModel, z) -> np.ndarray:
    return np.asarray(z) @ model.components + model.mean


def n_components_for(rows, var_target: float) -> int:
    return pca_fit(rows, var_target).n_components
