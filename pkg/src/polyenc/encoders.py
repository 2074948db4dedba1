"""Polygon encoders built from the geometry, spectral and nn primitives.

Every encoder splits into a fixed featurizer (no trainable state) and a
trainable network. Spectral kinds additionally carry fitted preprocessing
(standardization statistics and an optional PCA basis) as buffers, so one
``state_dict`` captures everything needed to reproduce an embedding.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from . import nn
from .geometry import CENTERED_UNIT, NUFT_SPACE, GeometryError, PolyGeom, normalize_unit
from .simplex import to_simplex_mesh
from .spectral import (
    NORM_BATCH, NORM_L2, NORM_NONE, FrequencyMap, flatten_spectrum, geometric_grid,
    ifft_rasterize, linear_grid, nuft, pca_fit,
)

NUFTSPEC_GEOMETRIC = "nuftspec_geometric"
NUFTSPEC_LINEAR = "nuftspec_linear"
DDSL_MLP = "ddsl_mlp"
RESNET1D = "resnet1d"
VEERCNN = "veercnn"

SPECTRAL_KINDS = (NUFTSPEC_GEOMETRIC, NUFTSPEC_LINEAR, DDSL_MLP)
SEQUENCE_KINDS = (RESNET1D, VEERCNN)
ENCODER_KINDS = SPECTRAL_KINDS + SEQUENCE_KINDS


@dataclass
class EncoderConfig:
    kind: str
    d: int = 64
    t: int = 2
    K: int = 1
    N_wx: int = 24
    w_min: float = 0.5
    w_max: float = 12.0
    pca_var: float | None = None
    mlp_layers: int = 1
    mlp_hidden: int = 128
    norm_mode: str = NORM_BATCH
    raster_side: int | None = None
    dropout: float = 0.5
    padding: str = nn.CIRCULAR
    veer_layers: int = 3
    veer_hidden: int = 64

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.kind not in ENCODER_KINDS:
            raise ValueError(f"unknown encoder kind {self.kind!r}; expected one of {ENCODER_KINDS}")
        if self.d <= 0:
            raise ValueError("embedding width d must be positive")
        if self.t < 0 or self.K < 0:
            raise ValueError("t and K must be non-negative")
        if self.norm_mode not in (NORM_NONE, NORM_L2, NORM_BATCH):
            raise ValueError(f"unknown norm_mode {self.norm_mode!r}")
        if self.pca_var is not None and not 0 < self.pca_var <= 1:
            raise ValueError("pca_var must lie in (0, 1]")
        if self.padding not in (nn.CIRCULAR, nn.ZERO):
            raise ValueError(f"unknown padding {self.padding!r}")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")
        if self.mlp_layers < 0 or self.mlp_hidden <= 0 or self.veer_layers < 1:
            raise ValueError("layer counts and widths must be positive")
        if self.kind == DDSL_MLP and self.side < self.N_wx:
            raise ValueError("raster_side must be at least N_wx")

    @property
    def side(self) -> int:
        return self.raster_side if self.raster_side is not None else self.N_wx

    def freq_map(self) -> FrequencyMap:
        if self.kind == NUFTSPEC_GEOMETRIC:
            return geometric_grid(self.N_wx, self.w_min, self.w_max)
        if self.kind in (NUFTSPEC_LINEAR, DDSL_MLP):
            return linear_grid(self.N_wx)
        raise ValueError(f"{self.kind} has no frequency map")

    @property
    def normalization(self) -> str:
        return NUFT_SPACE if self.kind in SPECTRAL_KINDS else CENTERED_UNIT

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown encoder keys: {unknown}")
        return cls(**d)


# ---------------------------------------------------------------------------
# sequence features

def boundary_concat(g: PolyGeom) -> np.ndarray:
    """All ring vertices, parts in stored order, exterior before holes."""
    return g.vertices()


def kdelta_encode(seq, t: int) -> np.ndarray:
    """Each row: the point, then offsets to its ``t`` predecessors and ``t``
    successors (nearest last / first), with cyclic indexing."""
    x = np.asarray(seq, dtype=np.float64)
    m = len(x)
    if m <= 2 * t:
        raise GeometryError(f"kdelta with t={t} needs more than {2 * t} points, got {m}")
    offsets = list(range(-t, 0)) + list(range(1, t + 1))
    cols = [x] + [np.roll(x, -o, axis=0) - x for o in offsets]
    return np.concatenate(cols, axis=1)


# ---------------------------------------------------------------------------
# fitted preprocessing for spectral kinds

class Preprocess(nn.Module):
    """Optional per-feature standardization followed by optional PCA projection."""

    def __init__(self, standardize: bool, pca_var: float | None):
        super().__init__()
        self.standardize = standardize
        self.pca_var = pca_var

    @property
    def fitted(self) -> bool:
        need = (["mean"] if self.standardize else []) + (["pca_components"] if self.pca_var else [])
        return all(k in self.buffers for k in need)

    def fit(self, rows: np.ndarray) -> None:
        rows = np.asarray(rows, dtype=np.float64)
        self.buffers.clear()
        if self.standardize:
            self.buffers["mean"] = rows.mean(axis=0)
            self.buffers["std"] = np.maximum(rows.std(axis=0), 1e-12)
            rows = (rows - self.buffers["mean"]) / self.buffers["std"]
        if self.pca_var:
            model = pca_fit(rows, self.pca_var)
            self.buffers["pca_mean"] = model.mean
            self.buffers["pca_components"] = model.components
            # unit-variance scores keep the MLP input well scaled
            self.buffers["pca_scale"] = 1.0 / np.sqrt(np.maximum(model.explained_variance, 1e-12))

    def load_arrays(self, state: dict, prefix: str) -> None:
        self.buffers.clear()
        for k, v in state.items():
            if k.startswith(prefix):
                self.buffers[k[len(prefix):]] = np.array(v, dtype=np.float64)

    def out_dim(self, in_dim: int) -> int:
        if "pca_components" in self.buffers:
            return len(self.buffers["pca_components"])
        return in_dim

    def apply(self, rows: np.ndarray) -> np.ndarray:
        if not self.fitted:
            raise RuntimeError("preprocessing used before fit")
        x = np.asarray(rows, dtype=np.float64)
        if self.standardize:
            x = (x - self.buffers["mean"]) / self.buffers["std"]
        if self.pca_var:
            x = (x - self.buffers["pca_mean"]) @ self.buffers["pca_components"].T
            x = x * self.buffers["pca_scale"]
        return x


# ---------------------------------------------------------------------------
# encoders

class Encoder(nn.Module):
    """Featurizer plus trainable network mapping a batch of features to ``(B, d)``.

    Lifecycle: ``featurize`` each (normalized) geometry, ``fit`` preprocessing
    on training features, ``build`` the network, then ``forward``/``embed``.
    """

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.prep = self.add("prep", Preprocess(
            standardize=cfg.norm_mode == NORM_BATCH and cfg.kind in SPECTRAL_KINDS,
            pca_var=cfg.pca_var if cfg.kind in SPECTRAL_KINDS else None,
        ))
        self.net: nn.Module | None = None
        self._fmap = cfg.freq_map() if cfg.kind in SPECTRAL_KINDS else None

    @property
    def kind(self) -> str:
        return self.cfg.kind

    # features ---------------------------------------------------------------
    def featurize(self, g: PolyGeom) -> np.ndarray:
        """Raw features of one geometry already normalized for this encoder."""
        cfg = self.cfg
        if cfg.kind in (NUFTSPEC_GEOMETRIC, NUFTSPEC_LINEAR):
            spec = nuft(to_simplex_mesh(g), self._fmap)
            mode = NORM_L2 if cfg.norm_mode == NORM_L2 else NORM_NONE
            return flatten_spectrum(spec, mode)
        if cfg.kind == DDSL_MLP:
            img = ifft_rasterize(nuft(to_simplex_mesh(g), self._fmap), cfg.side).pixels.ravel()
            if cfg.norm_mode == NORM_L2:
                norm = np.linalg.norm(img)
                if norm < 1e-15:
                    raise ValueError("cannot L2-normalize an all-zero raster")
                img = img / norm
            return img
        seq = boundary_concat(g)
        if len(seq) < 4:
            raise GeometryError(f"{cfg.kind} needs at least 4 vertices, got {len(seq)}")
        if cfg.kind == RESNET1D:
            return kdelta_encode(seq, cfg.t).T.copy()
        return seq.T.copy()

    def featurize_many(self, geoms) -> np.ndarray:
        feats = [self.featurize(g) for g in geoms]
        shapes = {f.shape for f in feats}
        if len(shapes) != 1:
            raise ValueError(f"features of differing shapes {sorted(shapes)}; "
                             "resample geometries to a common vertex budget")
        return np.stack(feats)

    def fit(self, raw: np.ndarray) -> None:
        if self.cfg.kind in SPECTRAL_KINDS and (self.prep.standardize or self.prep.pca_var):
            self.prep.fit(raw)

    def preprocess(self, raw: np.ndarray) -> np.ndarray:
        if self.cfg.kind in SPECTRAL_KINDS and (self.prep.standardize or self.prep.pca_var):
            return self.prep.apply(raw)
        return np.asarray(raw, dtype=np.float64)

    def input_dim(self) -> int:
        cfg = self.cfg
        if cfg.kind in (NUFTSPEC_GEOMETRIC, NUFTSPEC_LINEAR):
            return self.prep.out_dim(2 * self._fmap.n_w)
        if cfg.kind == DDSL_MLP:
            return self.prep.out_dim(cfg.side * cfg.side)
        return 4 * cfg.t + 2 if cfg.kind == RESNET1D else 2

    # network ----------------------------------------------------------------
    def build(self, rng: np.random.Generator) -> "Encoder":
        cfg = self.cfg
        n_in = self.input_dim()
        if cfg.kind in SPECTRAL_KINDS:
            net = nn.mlp(n_in, cfg.mlp_hidden, cfg.d, cfg.mlp_layers, rng)
        elif cfg.kind == RESNET1D:
            layers = [
                ("stem", nn.Conv1d(n_in, cfg.d, rng, padding=cfg.padding, bias=False)),
                ("stem_bn", nn.BatchNorm1d(cfg.d)),
                ("stem_relu", nn.ReLU()),
                ("pool", nn.MaxPool1d(2, 2, cfg.padding)),
            ]
            layers += [(f"block{i}", nn.ResidualBlock1d(cfg.d, rng, cfg.padding)) for i in range(cfg.K)]
            layers += [("gmp", nn.GlobalMaxPool()), ("dropout", nn.Dropout(cfg.dropout))]
            net = nn.Sequential(*layers)
        else:
            layers = []
            width = n_in
            for i in range(cfg.veer_layers):
                out = cfg.d if i == cfg.veer_layers - 1 else cfg.veer_hidden
                layers += [(f"conv{i}", nn.Conv1d(width, out, rng, padding=nn.ZERO)),
                           (f"relu{i}", nn.ReLU())]
                width = out
            layers.append(("gap", nn.GlobalAvgPool()))
            net = nn.Sequential(*layers)
        self.net = self.add("net", net)
        return self

    def forward(self, x, train=False, rng=None):
        if self.net is None:
            raise RuntimeError("encoder network not built")
        return self.net.forward(x, train, rng)

    def backward(self, dy):
        return self.net.backward(dy)

    # convenience ------------------------------------------------------------
    def normalize(self, g: PolyGeom) -> PolyGeom:
        return normalize_unit([g], self.cfg.normalization)[0][0]

    def embed(self, geoms, normalize: bool = True) -> np.ndarray:
        """Eval-mode embeddings ``(N, d)``; each geometry is normalized on its own."""
        geoms = [self.normalize(g) if normalize else g for g in geoms]
        out = []
        for g in geoms:
            x = self.preprocess(self.featurize(g)[None])
            out.append(self.forward(x)[0])
        return np.stack(out)


def build_encoder(cfg: EncoderConfig, train_geoms=None, seed: int = 0) -> Encoder:
    """Create an encoder, fit its preprocessing on ``train_geoms`` (already
    normalized) when it needs any, and initialize the network from ``seed``."""
    enc = Encoder(cfg)
    if cfg.kind in SPECTRAL_KINDS and (enc.prep.standardize or enc.prep.pca_var):
        if not train_geoms:
            raise ValueError(f"{cfg.kind} preprocessing needs training geometries to fit")
        enc.fit(enc.featurize_many(train_geoms))
    return enc.build(np.random.default_rng(seed))


def _embed_kind(kind: str, g: PolyGeom, encoder: Encoder) -> np.ndarray:
    if encoder.kind != kind:
        raise ValueError(f"expected a {kind} encoder, got {encoder.kind}")
    return encoder.embed([g], normalize=False)[0]


def nuftspec_encode(g: PolyGeom, encoder: Encoder) -> np.ndarray:
    if encoder.kind not in (NUFTSPEC_GEOMETRIC, NUFTSPEC_LINEAR):
        raise ValueError(f"expected a nuftspec encoder, got {encoder.kind}")
    return encoder.embed([g], normalize=False)[0]


def ddsl_mlp_encode(g: PolyGeom, encoder: Encoder) -> np.ndarray:
    return _embed_kind(DDSL_MLP, g, encoder)


def resnet1d_encode(g: PolyGeom, encoder: Encoder) -> np.ndarray:
    return _embed_kind(RESNET1D, g, encoder)


def veercnn_encode(g: PolyGeom, encoder: Encoder) -> np.ndarray:
    return _embed_kind(VEERCNN, g, encoder)
