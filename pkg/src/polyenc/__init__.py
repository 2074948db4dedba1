"""Polygon encoders: NUFT spectral features over simplex meshes, circular 1D
convolutional encoders, task heads and invariance property suites."""
from .encoders import EncoderConfig, Encoder, build_encoder
from .geometry import GeometryError, PolyGeom, Polygon, parse_wkt, serialize_wkt
from .kernels import BACKEND
from .simplex import SimplexMesh, to_simplex_mesh
from .spectral import FrequencyMap, SpectralVector, geometric_grid, linear_grid, nuft

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Encoder", "EncoderConfig", "FrequencyMap", "GeometryError", "PolyGeom",
    "Polygon", "SimplexMesh", "SpectralVector", "build_encoder", "geometric_grid",
    "linear_grid", "nuft", "parse_wkt", "serialize_wkt", "to_simplex_mesh",
]
