"""Hot-kernel dispatch.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy versions in ``_pykernels`` are used. Set ``POLYENC_PURE=1`` to force the
fallback. ``BACKEND`` names the active implementation.
"""
import os

from . import _pykernels

OUTSIDE = _pykernels.OUTSIDE
INSIDE = _pykernels.INSIDE
BOUNDARY = _pykernels.BOUNDARY

_compiled = None
if os.environ.get("POLYENC_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

_impl = _compiled if _compiled is not None else _pykernels
BACKEND = "cython" if _compiled is not None else "numpy"

nuft_triangles = _impl.nuft_triangles
ring_self_intersections = _impl.ring_self_intersections
rings_cross = _impl.rings_cross
points_in_ring = _impl.points_in_ring


def backends():
    """Return ``{name: module}`` for every importable implementation."""
    out = {"numpy": _pykernels}
    if _compiled is not None:
        out["cython"] = _compiled
    return out
