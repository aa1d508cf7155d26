"""Backend selection for the integration kernels.

The compiled extension is preferred. Set ``SPINEXCHANGE_PURE_PYTHON=1`` to
force the NumPy fallback.
"""
import os

from . import _kernels_py

if os.environ.get("SPINEXCHANGE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

meanfield_rhs = _impl.meanfield_rhs
threemode_rhs = _impl.threemode_rhs
