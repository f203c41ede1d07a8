"""Backend selection for the hot array kernels.

The compiled extension is used when it was built; otherwise the NumPy fallback
is loaded. Set ``DIRTYMAC_KERNELS=python`` to force the fallback.
"""
import os

import numpy as np

from . import _pykernels

if os.environ.get("DIRTYMAC_KERNELS", "").lower() == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def quantize(x, step):
    return _impl.quantize(_f64(x), float(step))


def mod(x, step):
    return _impl.mod(_f64(x), float(step))


def encode(v, s_est, d, alpha, step):
    return _impl.encode(_f64(v), _f64(s_est), _f64(d), float(alpha), float(step))


def decode(y, d1, d2, alpha_r, gamma, beta, step):
    return _impl.decode(_f64(y), _f64(d1), _f64(d2), float(alpha_r),
                        float(gamma), float(beta), float(step))


def nearest_index(y, step, m):
    return _impl.nearest_index(_f64(y), float(step), int(m))
