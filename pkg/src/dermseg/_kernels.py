"""Kernel backend selection.

The compiled extension is preferred; the pure-Python module is the fallback
when the extension was not built. Set ``DERMSEG_PURE=1`` to force the
fallback (useful for benchmarking and cross-checking).
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

if _ckernels is not None and os.environ.get("DERMSEG_PURE", "") not in ("1", "true", "yes"):
    _impl = _ckernels
    BACKEND = "cython"
else:
    _impl = _pykernels
    BACKEND = "python"

flood_fill = _impl.flood_fill
label_components = _impl.label_components
kmeans_assign = _impl.kmeans_assign
median_fill = _impl.median_fill


def available_backends():
    """Return ``{name: module}`` for every importable kernel backend."""
    out = {"python": _pykernels}
    if _ckernels is not None:
        out["cython"] = _ckernels
    return out
