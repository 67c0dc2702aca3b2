# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: batched tridiagonal solves and banded stencil application.

These two loops dominate the runtime of the IMEX stepper (one tridiagonal
solve per Fourier mode per step) and of the weighted-norm machinery (one
stencil application per y-derivative).  Semantics must match
``prandtl._kernels._numpy_impl`` exactly.
"""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()


def tridiag_solve_batch(double[:, ::1] dl, double[:, ::1] d,
                        double[:, ::1] du, double[:, ::1] rhs):
    """Solve B independent tridiagonal systems by the Thomas algorithm.

    dl[b, 0] and du[b, n-1] are ignored.  No pivoting: callers must supply
    systems that are safe for unpivoted elimination (the IMEX matrices are
    diagonally dominant by construction).
    """
    cdef Py_ssize_t nb = d.shape[0]
    cdef Py_ssize_t n = d.shape[1]
    out = np.empty((nb, n), dtype=np.float64)
    work = np.empty((nb, n), dtype=np.float64)
    cdef double[:, ::1] x = out
    cdef double[:, ::1] cp = work
    cdef Py_ssize_t b, j
    cdef double m, denom

    with nogil:
        for b in range(nb):
            denom = d[b, 0]
            cp[b, 0] = du[b, 0] / denom
            x[b, 0] = rhs[b, 0] / denom
            for j in range(1, n):
                denom = d[b, j] - dl[b, j] * cp[b, j - 1]
                if j < n - 1:
                    cp[b, j] = du[b, j] / denom
                x[b, j] = (rhs[b, j] - dl[b, j] * x[b, j - 1]) / denom
            for j in range(n - 2, -1, -1):
                x[b, j] = x[b, j] - cp[b, j] * x[b, j + 1]
    return out


def stencil_apply(double[:, ::1] coeffs, long[::1] start, double[:, ::1] f):
    """Apply a per-row stencil along the last axis of f.

    out[b, j] = sum_s coeffs[j, s] * f[b, start[j] + s]
    """
    cdef Py_ssize_t nb = f.shape[0]
    cdef Py_ssize_t n = f.shape[1]
    cdef Py_ssize_t w = coeffs.shape[1]
    out = np.empty((nb, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t b, j, s
    cdef double acc
    cdef long st

    with nogil:
        for b in range(nb):
            for j in range(n):
                st = start[j]
                acc = 0.0
                for s in range(w):
                    acc += coeffs[j, s] * f[b, st + s]
                o[b, j] = acc
    return out
