"""Select the covariance kernel at import time.

The compiled ``_ckernel`` is used when it was built; set
``PROCNET_PURE_PYTHON=1`` to force the pure-Python implementation.
"""
import os

from . import _pykernel

if os.environ.get("PROCNET_PURE_PYTHON", "") not in ("", "0"):
    advance = _pykernel.advance
    BACKEND = "python"
else:
    try:
        from ._ckernel import advance
    except ImportError:
        advance = _pykernel.advance
        BACKEND = "python"
    else:
        BACKEND = "cython"

py_advance = _pykernel.advance

__all__ = ["advance", "py_advance", "BACKEND"]
