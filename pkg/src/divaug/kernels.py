"""Backend selection for the per-pixel kernels.

The compiled extension is used when it was built; otherwise (or when
``DIVAUG_PURE_PYTHON`` is set to a non-empty value) the numpy twins are used.
Both produce identical output, so the choice only affects speed.
"""
import os

from . import _pykernels

_impl = _pykernels
if not os.environ.get("DIVAUG_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        pass

BACKEND = "python" if _impl is _pykernels else "cython"

affine_nearest = _impl.affine_nearest
blend = _impl.blend
smooth3x3 = _impl.smooth3x3
grayscale = _impl.grayscale

__all__ = ["BACKEND", "affine_nearest", "blend", "smooth3x3", "grayscale"]
