"""Kernel backend selection: compiled core if available, numpy fallback otherwise.

``BACKEND`` records which implementation is live; ``benchmarks/bench_kernels.py``
compares the two.  Override with the environment variable
``PRANDTL_FORCE_NUMPY_KERNELS=1`` (useful for benchmarking and debugging).
"""

import os

import numpy as np

from . import _numpy_impl

try:
    if os.environ.get("PRANDTL_FORCE_NUMPY_KERNELS", "0") == "1":
        raise ImportError("numpy kernels forced by environment")
    from . import _core

    BACKEND = "cython"
except ImportError:
    _core = None
    BACKEND = "numpy"


def _as_c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def tridiag_solve_batch(dl, d, du, rhs):
    """Solve a batch of tridiagonal systems; arrays are (nbatch, n)."""
    dl, d, du, rhs = _as_c(dl), _as_c(d), _as_c(du), _as_c(rhs)
    if _core is not None:
        return _core.tridiag_solve_batch(dl, d, du, rhs)
    return _numpy_impl.tridiag_solve_batch(dl, d, du, rhs)


def stencil_apply(coeffs, start, f):
    """out[b, j] = sum_s coeffs[j, s] * f[b, start[j] + s]."""
    coeffs, f = _as_c(coeffs), _as_c(f)
    start = np.ascontiguousarray(start, dtype=np.int64)
    if _core is not None:
        return _core.stencil_apply(coeffs, start, f)
    return _numpy_impl.stencil_apply(coeffs, start, f)
