"""Hot kernels, compiled when available.

The Cython build of ``_ckernels`` is used if it imports; otherwise the
pure-Python versions from ``_pykernels`` are used. Set
``SIGHTLINE_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

if os.environ.get("SIGHTLINE_PURE_PYTHON") == "1":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

autocorrelation = _impl.autocorrelation
luma_rotate_cw = _impl.luma_rotate_cw

__all__ = ["BACKEND", "autocorrelation", "luma_rotate_cw"]
