"""Periodic-x / graded-y tensor grid with derivative and integration operators.

x lives on a torus of period Lx and is differentiated spectrally; y covers
[0, Ymax] with nodes clustered near the wall by an exponential stretch, and is
differentiated with Fornberg finite-difference stencils built directly on the
non-uniform nodes (order >= 4 interior, narrow one-sided stencils at the two
boundary rows).  Quadrature weights come from integrating 6-point Lagrange
interpolants interval by interval, so integrating a constant is exact up to
rounding.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    GridMismatchError,
    InvalidTailError,
    ResolutionError,
    UnsupportedOrderError,
)

_MAX_DY_ORDER = 8
_QUAD_STENCIL = 6


def fornberg_weights(x0, nodes, maxorder):
    """Finite-difference weights on arbitrary nodes (Fornberg's recursion).

    Returns an array W of shape (maxorder+1, len(nodes)) with
    f^(m)(x0) ~= sum_j W[m, j] f(nodes[j]).
    """
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    if maxorder >= n:
        raise ValueError("need more nodes than derivative order")
    W = np.zeros((maxorder + 1, n))
    W[0, 0] = 1.0
    c1 = 1.0
    c4 = nodes[0] - x0
    for i in range(1, n):
        mn = min(i, maxorder)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            for m in range(mn, 0, -1):
                W[m, i] = c1 * (m * W[m - 1, i - 1] - c5 * W[m, i - 1]) / c2
            W[0, i] = -c1 * c5 * W[0, i - 1] / c2
            for m in range(mn, 0, -1):
                W[m, j] = (c4 * W[m, j] - m * W[m - 1, j]) / c3
            W[0, j] = c4 * W[0, j] / c3
        c1 = c2
    return W


def _lagrange_interval_weights(nodes, a, b):
    """Integrals over [a, b] of the Lagrange basis polynomials on ``nodes``."""
    c = 0.5 * (a + b)
    z = nodes - c
    w = np.empty(len(nodes))
    for m in range(len(nodes)):
        roots = np.delete(z, m)
        poly = np.poly(roots)
        denom = np.prod(z[m] - roots)
        anti = np.polyint(poly)
        w[m] = (np.polyval(anti, b - c) - np.polyval(anti, a - c)) / denom
    return w


@dataclass(frozen=True)
class GridSpec:
    """Discretization of the half plane: periodic x times truncated graded y."""

    Nx: int
    Lx: float
    Ny: int
    Ymax: float
    alpha: float
    x: np.ndarray = field(repr=False, compare=False)
    y: np.ndarray = field(repr=False, compare=False)
    quad_weights: np.ndarray = field(repr=False, compare=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def wx(self):
        return self.Lx / self.Nx

    def stretch(self, s):
        s = np.asarray(s, dtype=float)
        if self.alpha == 0.0:
            return self.Ymax * s
        return self.Ymax * np.expm1(self.alpha * s) / np.expm1(self.alpha)

    def __eq__(self, other):
        if not isinstance(other, GridSpec):
            return NotImplemented
        return (self.Nx, self.Lx, self.Ny, self.Ymax, self.alpha) == (
            other.Nx, other.Lx, other.Ny, other.Ymax, other.alpha)

    def __hash__(self):
        return hash((self.Nx, self.Lx, self.Ny, self.Ymax, self.alpha))

    # -- construction -----------------------------------------------------

    @staticmethod
    def make(Nx=32, Lx=2.0 * np.pi, Ny=128, Ymax=12.0, alpha=3.0):
        if Nx < 4 or Nx % 2:
            raise ValueError("Nx must be even and >= 4")
        if Ny < _QUAD_STENCIL:
            raise ValueError(f"Ny must be >= {_QUAD_STENCIL}")
        x = np.arange(Nx) * (Lx / Nx)
        s = np.linspace(0.0, 1.0, Ny)
        if alpha == 0.0:
            y = Ymax * s
        else:
            y = Ymax * np.expm1(alpha * s) / np.expm1(alpha)
        y[0], y[-1] = 0.0, Ymax
        if np.any(np.diff(y) <= 0):
            raise ValueError("stretch must be strictly increasing")
        cum = _cumulative_matrix(y)
        qw = cum[-1].copy()
        g = GridSpec(Nx, Lx, Ny, Ymax, alpha, x, y, qw)
        g._cache["cum"] = cum
        err = abs(qw.sum() - Ymax) / Ymax
        if err > 1e-12:
            raise ValueError(f"quadrature of 1 off by {err:.2e}")
        return g

    def refined(self, rx=1, ry=1):
        """Grid with the x count multiplied by rx and the y intervals by ry."""
        return GridSpec.make(self.Nx * rx, self.Lx,
                             (self.Ny - 1) * ry + 1, self.Ymax, self.alpha)

    # -- field constructors ------------------------------------------------

    def field(self, values):
        return Field2D(self, np.array(values, dtype=float))

    def zeros(self):
        return Field2D(self, np.zeros((self.Nx, self.Ny)))

    def from_function(self, fn):
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        return Field2D(self, np.asarray(fn(X, Y), dtype=float) + np.zeros_like(X))

    def from_profile(self, prof):
        """x-independent field from a 1D y-profile (array or callable)."""
        vals = prof(self.y) if callable(prof) else np.asarray(prof, dtype=float)
        return Field2D(self, np.broadcast_to(vals, (self.Nx, self.Ny)).copy())

    # -- cached operators ---------------------------------------------------

    def dy_stencil(self, p):
        key = ("dy", p)
        if key not in self._cache:
            self._cache[key] = _build_dy_stencil(self.y, p)
        return self._cache[key]

    def cumulative_matrix(self):
        if "cum" not in self._cache:
            self._cache["cum"] = _cumulative_matrix(self.y)
        return self._cache["cum"]

    def wavenumbers(self):
        key = "kx"
        if key not in self._cache:
            self._cache[key] = 2.0 * np.pi / self.Lx * np.arange(self.Nx // 2 + 1)
        return self._cache[key]


def _cumulative_matrix(y):
    """C with (C @ f)[j] ~= integral of f over [0, y_j]; row j accumulates
    6-point Lagrange interval integrals. Row 0 is exactly zero."""
    n = len(y)
    w = min(_QUAD_STENCIL, n)
    C = np.zeros((n, n))
    acc = np.zeros(n)
    for i in range(n - 1):
        lo = min(max(i - (w // 2 - 1), 0), n - w)
        acc_add = _lagrange_interval_weights(y[lo:lo + w], y[i], y[i + 1])
        acc[lo:lo + w] += acc_add
        C[i + 1] = acc
    return C


def _build_dy_stencil(y, p):
    """Per-row Fornberg stencil (coeffs, start) for the p-th y-derivative."""
    n = len(y)
    W = p + 4 if (p + 4) % 2 else p + 5
    W = min(W, n)
    Wb = min(p + 3, n)
    hw = W // 2
    coeffs = np.zeros((n, W))
    start = np.zeros(n, dtype=np.int64)
    for j in range(n):
        s_full = min(max(j - hw, 0), n - W)
        start[j] = s_full
        if hw <= j <= n - 1 - hw:
            nodes = y[s_full:s_full + W]
            coeffs[j, :] = fornberg_weights(y[j], nodes, p)[p]
        else:
            sb = min(max(j - Wb // 2, 0), n - Wb)
            sb = min(max(sb, s_full), s_full + W - Wb)
            nodes = y[sb:sb + Wb]
            coeffs[j, sb - s_full:sb - s_full + Wb] = fornberg_weights(y[j], nodes, p)[p]
    return coeffs, start


@dataclass
class Field2D:
    """Real scalar field sampled on a GridSpec; the universal carrier."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.Nx, self.grid.Ny):
            raise ValueError(
                f"field shape {self.values.shape} != grid ({self.grid.Nx}, {self.grid.Ny})")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    def _check(self, other):
        if self.grid != other.grid:
            raise GridMismatchError("fields live on different grids")

    def copy(self):
        return Field2D(self.grid, self.values.copy())

    def __add__(self, other):
        if isinstance(other, Field2D):
            self._check(other)
            return Field2D(self.grid, self.values + other.values)
        return Field2D(self.grid, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Field2D):
            self._check(other)
            return Field2D(self.grid, self.values - other.values)
        return Field2D(self.grid, self.values - other)

    def __rsub__(self, other):
        return Field2D(self.grid, other - self.values)

    def __mul__(self, other):
        if isinstance(other, Field2D):
            self._check(other)
            return Field2D(self.grid, self.values * other.values)
        return Field2D(self.grid, self.values * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Field2D):
            self._check(other)
            return Field2D(self.grid, self.values / other.values)
        return Field2D(self.grid, self.values / other)

    def __neg__(self):
        return Field2D(self.grid, -self.values)


# -- operators ---------------------------------------------------------------


def dx(f, n=1):
    """Spectral x-derivative of order n (exact for band-limited fields)."""
    g = f.grid
    if n == 0:
        return f.copy()
    if n > g.Nx // 4:
        raise ResolutionError(f"dx order {n} too large for Nx={g.Nx}")
    return Field2D(g, dx_values(g, f.values, n))


def dx_values(g, vals, n):
    F = np.fft.rfft(vals, axis=0)
    k = g.wavenumbers()
    F *= (1j * k[:, None]) ** n
    if n % 2 and g.Nx % 2 == 0:
        F[-1] = 0.0
    return np.fft.irfft(F, n=g.Nx, axis=0)


def dy(f, p=1):
    """Finite-difference y-derivative of order p on the graded grid."""
    g = f.grid
    if p == 0:
        return f.copy()
    if p > _MAX_DY_ORDER:
        raise UnsupportedOrderError(f"dy order {p} > supported {_MAX_DY_ORDER}")
    return Field2D(g, dy_values(g, f.values, p))


def dy_values(g, vals, p):
    coeffs, start = g.dy_stencil(p)
    return _kernels.stencil_apply(coeffs, start, vals)


def integrate_y_from_0(f):
    """Cumulative quadrature F(x, y) = integral of f from 0 to y; F(x,0)=0."""
    g = f.grid
    return Field2D(g, f.values @ g.cumulative_matrix().T)


def integrate_y_to_inf(f, tail_rate):
    """Integral from y to infinity: grid part plus an algebraic tail model.

    The tail assumes f ~ f(x, Ymax) * (y/Ymax)^(-tail_rate) beyond the grid,
    contributing f(x, Ymax) * Ymax / (tail_rate - 1) at every y.
    """
    if tail_rate <= 1.0:
        raise InvalidTailError(f"tail_rate must exceed 1, got {tail_rate}")
    g = f.grid
    cum = f.values @ g.cumulative_matrix().T
    total = cum[:, -1:]
    tail = f.values[:, -1:] * (g.Ymax / (tail_rate - 1.0))
    return Field2D(g, total - cum + tail)


def weight_profile(lam, grid):
    """x-independent field with values <y>^lam = (1 + y^2)^(lam/2)."""
    w = (1.0 + grid.y**2) ** (lam / 2.0)
    return Field2D(grid, np.broadcast_to(w, (grid.Nx, grid.Ny)).copy())


def weight_values(grid, lam):
    return (1.0 + grid.y**2) ** (lam / 2.0)


def smooth_step(s):
    """C^inf monotone step: 0 for s <= 0, 1 for s >= 1."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0.0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
        b = np.where(s < 1.0, np.exp(-1.0 / np.maximum(1.0 - s, 1e-300)), 0.0)
    return a / (a + b)


def smooth_step_deriv(s):
    """Derivative of smooth_step (zero outside (0, 1))."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = (s > 0.0) & (s < 1.0)
    u = s[inside]
    a = np.exp(-1.0 / u)
    b = np.exp(-1.0 / (1.0 - u))
    out[inside] = a * b * (1.0 / u**2 + 1.0 / (1.0 - u) ** 2) / (a + b) ** 2
    return out
