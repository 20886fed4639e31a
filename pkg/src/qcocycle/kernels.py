"""Backend selection for the stepping kernels.

The compiled extension is preferred when importable; setting the environment
variable ``QCOCYCLE_PURE_PYTHON=1`` forces the numpy fallback (useful for
benchmarking and debugging).
"""

import os

from . import _kernels_py

_FORCE_PY = os.environ.get("QCOCYCLE_PURE_PYTHON", "").lower() in ("1", "true", "yes")

if not _FORCE_PY:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"
else:
    _impl = _kernels_py
    BACKEND = "python"

import numpy as _np

rk4_left = _impl.rk4_left
rk4_right = _impl.rk4_right


def _c(a):
    return _np.ascontiguousarray(a, dtype=_np.complex128)


def transfer_products(M, uf, uh, n, s):
    return _impl.transfer_products(_c(M), _c(uf), _c(uh), n, s)


def causal_matconv(lam, v):
    return _impl.causal_matconv(_c(lam), _c(v))
