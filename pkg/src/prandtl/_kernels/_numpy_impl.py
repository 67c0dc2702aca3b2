"""Pure-numpy fallback for the compiled kernels.

Same contracts as ``_core``: batched Thomas elimination (vectorized over the
batch axis) and per-row stencil application (vectorized over the stencil
width).
"""

import numpy as np


def tridiag_solve_batch(dl, d, du, rhs):
    nb, n = d.shape
    cp = np.empty((nb, n))
    x = np.empty((nb, n))
    cp[:, 0] = du[:, 0] / d[:, 0]
    x[:, 0] = rhs[:, 0] / d[:, 0]
    for j in range(1, n):
        denom = d[:, j] - dl[:, j] * cp[:, j - 1]
        if j < n - 1:
            cp[:, j] = du[:, j] / denom
        x[:, j] = (rhs[:, j] - dl[:, j] * x[:, j - 1]) / denom
    for j in range(n - 2, -1, -1):
        x[:, j] -= cp[:, j] * x[:, j + 1]
    return x


def stencil_apply(coeffs, start, f):
    n, w = coeffs.shape
    out = np.zeros((f.shape[0], n))
    for s in range(w):
        out += coeffs[:, s] * f[:, start + s]
    return out
