"""Monotone shear profiles and their exact heat evolution.

The built-in family is u0(y) = N_k * integral_0^y (1+s^2)^(-k/2) ds, an odd
C^inf profile rising from 0 to 1 whose first derivative sits exactly on the
envelope N_k <y>^(-k).  Evolution under the heat equation on the half line
with u(t, 0) = 0 uses the odd-reflection Gaussian kernel, evaluated by
Gauss-Hermite quadrature after the substitution xi = (ytilde - y) / (2 sqrt t);
node pairing makes u(t, 0) = 0 exact in floating point.  A Crank-Nicolson
reference solver on an independent uniform grid provides the cross-check.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded
from scipy.special import gamma, hyp2f1, roots_hermite

from .errors import ParameterError

_N_QUAD = 192


@lru_cache(maxsize=8)
def _hermite_positive(n):
    xi, wq = roots_hermite(n)
    pos = xi > 0.0
    return xi[pos].copy(), wq[pos].copy()


def _parity(p):
    """Parity of the full-line extension of the p-th profile derivative."""
    return -1.0 if p == 0 else (-1.0) ** (p + 1)


@dataclass
class ShearProfile:
    """Initial shear datum: decay rate k, derivative callables up to m+4,
    and the envelope constants of the monotonicity hypothesis.

    c1, c2 bound dy u0 * <y>^k from below/above; c3 is the (generally larger)
    constant in |dy^p u0| <= c3 <y>^(-k-p+1) for p >= 1.  full_line marks
    derivative callables (p >= 1) that are valid on all of R with the correct
    reflection parity built in, which lets the kernel quadrature skip the
    reflection bookkeeping.
    """

    k: float
    m: int
    derivs: list  # derivs[p](y) for y >= 0, p = 0..m+4
    c1: float
    c2: float
    c3: float
    full_line: bool = False
    _spline_cache: dict = field(default_factory=dict, repr=False)

    @property
    def max_order(self):
        return len(self.derivs) - 1

    def eval(self, y, p=0):
        if p > self.max_order:
            raise ParameterError(f"profile supports derivatives up to {self.max_order}")
        return self.derivs[p](np.asarray(y, dtype=float))

    def eval_ext(self, z, p=0):
        """Full-line extension with the reflection parity of order p."""
        z = np.asarray(z, dtype=float)
        if p >= 1 and self.full_line:
            return self.derivs[p](z)
        v = self._fast(p)(np.abs(z))
        return np.where(z >= 0.0, v, _parity(p) * v)

    def _fast(self, p):
        """Spline stand-in for derivative p (exact callables can be slow)."""
        if p not in self._spline_cache:
            yy = np.linspace(0.0, 64.0, 6001)
            self._spline_cache[p] = CubicSpline(yy, self.eval(yy, p))
        return self._spline_cache[p]


def _phi_terms(k, order):
    """Terms (c, a, b) meaning c * y^a * (1+y^2)^(-k/2-b) for the order-th
    derivative of phi(y) = (1+y^2)^(-k/2)."""
    terms = [(1.0, 0, 0)]
    for _ in range(order):
        new = {}
        for c, a, b in terms:
            if a > 0:
                key = (a - 1, b)
                new[key] = new.get(key, 0.0) + c * a
            key = (a + 1, b + 1)
            new[key] = new.get(key, 0.0) + c * (-k - 2 * b)
        terms = [(c, a, b) for (a, b), c in new.items() if c != 0.0]
    return terms


def _eval_terms(terms, k, y):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    base = 1.0 + y * y
    for c, a, b in terms:
        out += c * y**a * base ** (-k / 2.0 - b)
    return out


def builtin_profile(k, m=2):
    """The normalized odd profile with first-derivative envelope constant N_k."""
    if k <= 1.0:
        raise ParameterError("k must exceed 1 (normalizer diverges otherwise)")
    if m < 2 or m % 2:
        raise ParameterError("m must be an even integer >= 2")
    total = np.sqrt(np.pi) * gamma((k - 1.0) / 2.0) / (2.0 * gamma(k / 2.0))
    nk = 1.0 / total

    def make_eval():
        def ev(y):
            y = np.asarray(y, dtype=float)
            return nk * y * hyp2f1(0.5, k / 2.0, 1.5, -(y * y))
        return ev

    derivs = [make_eval()]
    for p in range(1, m + 5):
        terms = _phi_terms(k, p - 1)
        derivs.append(lambda y, t=terms: nk * _eval_terms(t, k, y))

    ys = np.linspace(0.0, 64.0, 4001)
    env = derivs[1](ys) * (1.0 + ys * ys) ** (k / 2.0)
    c1, c2 = float(env.min()), float(env.max())
    c3 = c2
    for p in range(1, m + 5):
        w = (1.0 + ys * ys) ** ((k + p - 1.0) / 2.0)
        c3 = max(c3, float(np.max(np.abs(derivs[p](ys)) * w)))
    return ShearProfile(k, m, derivs, c1, c2, c3, full_line=True)


def validate_profile(profile, tol=1e-10):
    """Check the structural hypotheses on a profile; raises on failure."""
    ys = np.linspace(0.0, 48.0, 2001)
    k = profile.k
    for p in range(0, profile.max_order + 1, 2):
        v = float(np.abs(profile.eval(0.0, p)))
        if v > 1e-8:
            raise ParameterError(f"even derivative {p} at 0 is {v:.2e}, not 0")
    env = profile.eval(ys, 1) * (1.0 + ys * ys) ** (k / 2.0)
    if env.min() <= 0.0:
        raise ParameterError("profile first derivative is not strictly positive")
    far = float(profile.eval(48.0))
    if abs(far - 1.0) > 2.0 * profile.c2 / (k - 1.0) * (1.0 + 48.0**2) ** ((1.0 - k) / 2.0) + tol:
        raise ParameterError(f"far-field limit {far} is not 1 within the envelope tail")


# -- tabulated profiles (external interface) ----------------------------------


def save_profile_table(profile, path, y=None):
    """Plain-text table (y, u0, derivatives) with a header naming k and m.

    The default tabulation step (0.005) keeps the cubic-spline reload error
    of the high derivatives near 1e-6."""
    if y is None:
        y = np.linspace(0.0, 48.0, 9601)
    cols = [y] + [profile.eval(y, p) for p in range(profile.max_order + 1)]
    header = f"k = {profile.k!r}\nm = {profile.m!r}\ncolumns: y u0 d1 ... d{profile.max_order}"
    np.savetxt(path, np.column_stack(cols), header=header)


def load_profile_table(path):
    """Rebuild a ShearProfile from a table written by save_profile_table.

    Columns are splined on the tabulated range; beyond it each derivative
    follows the algebraic tail <y>^(-k-p+1) matched at the last node (the
    function itself approaches 1 with a <y>^(1-k) defect).
    """
    k = m = None
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if "=" in line:
                name, _, val = line.lstrip("# ").partition("=")
                if name.strip() == "k":
                    k = float(val)
                elif name.strip() == "m":
                    m = int(float(val))
    if k is None or m is None:
        raise ParameterError("profile table header must name k and m")
    data = np.loadtxt(path)
    y_tab = data[:, 0]
    n_derivs = data.shape[1] - 1
    if n_derivs < m + 5:
        raise ParameterError(f"table has {n_derivs} derivative columns, need {m + 5}")
    y_end = y_tab[-1]

    def make(p):
        sp = CubicSpline(y_tab, data[:, p + 1])
        f_end = data[-1, p + 1]
        if p == 0:
            amp = (1.0 - f_end) * (1.0 + y_end**2) ** ((k - 1.0) / 2.0)

            def ev(y):
                y = np.asarray(y, dtype=float)
                inside = sp(np.minimum(y, y_end))
                outside = 1.0 - amp * (1.0 + y * y) ** ((1.0 - k) / 2.0)
                return np.where(y <= y_end, inside, outside)
        else:
            amp = f_end * (1.0 + y_end**2) ** ((k + p - 1.0) / 2.0)

            def ev(y):
                y = np.asarray(y, dtype=float)
                inside = sp(np.minimum(y, y_end))
                outside = amp * (1.0 + y * y) ** (-(k + p - 1.0) / 2.0)
                return np.where(y <= y_end, inside, outside)
        return ev

    derivs = [make(p) for p in range(m + 5)]
    env = derivs[1](y_tab) * (1.0 + y_tab**2) ** (k / 2.0)
    c1, c2 = float(env.min()), float(env.max())
    c3 = c2
    for p in range(1, m + 5):
        w = (1.0 + y_tab**2) ** ((k + p - 1.0) / 2.0)
        c3 = max(c3, float(np.max(np.abs(derivs[p](y_tab)) * w)))
    prof = ShearProfile(k, m, derivs, c1, c2, c3)
    validate_profile(prof)
    return prof


# -- heat evolution ------------------------------------------------------------


@dataclass
class ShearEvolution:
    """Shear flow u^s(t, .) and its y-derivatives sampled on a y-grid."""

    t: float
    k: float
    y: np.ndarray
    values: np.ndarray  # (max_order+1, Ny); row p is dy^p u^s(t, .)
    c_tilde0: float
    c_tilde1: float
    c_tilde2: float
    T_ref: float
    profile: ShearProfile

    def deriv(self, p):
        return self.values[p]

    def c_tilde3(self, p):
        return self.profile.c3 / self.c_tilde0 * (1.0 + self.T_ref) ** ((self.k + p - 1.0) / 2.0)


def evolve_heat_derivative(profile, t, p, y, n_quad=_N_QUAD):
    """dy^p u^s(t, .) at the points y via the reflection kernel."""
    if t < 0.0:
        raise ParameterError("t must be nonnegative")
    y = np.asarray(y, dtype=float)
    if t == 0.0:
        return profile.eval(y, p)
    xi, wq = _hermite_positive(n_quad)
    shift = 2.0 * np.sqrt(t) * xi
    z = np.concatenate([y[None, :] + shift[:, None], y[None, :] - shift[:, None]])
    vals = profile.eval_ext(z, p)
    n = len(xi)
    return (wq @ (vals[:n] + vals[n:])) / np.sqrt(np.pi)


def evolve_heat(profile, t, grid, T_ref=None, orders=None, n_quad=_N_QUAD):
    """Evolve the profile to time t on grid.y, with envelope constants
    quoted for the horizon T_ref (>= t)."""
    if t < 0.0:
        raise ParameterError("t must be nonnegative")
    if orders is None:
        orders = range(profile.max_order + 1)
    orders = list(orders)
    pmax = max(orders)
    T_ref = float(max(t, T_ref if T_ref is not None else t))
    vals = np.zeros((pmax + 1, len(grid.y)))
    for p in orders:
        vals[p] = evolve_heat_derivative(profile, t, p, grid.y, n_quad)
    k = profile.k
    ct0 = 2.0 ** (-k / 2.0)
    ct1 = profile.c1 * ct0 * (1.0 + T_ref) ** (-k / 2.0)
    ct2 = profile.c2 / ct0 * (1.0 + T_ref) ** (k / 2.0)
    return ShearEvolution(t, k, grid.y, vals, ct0, ct1, ct2, T_ref, profile)


@dataclass
class ShearDecayReport:
    """Measured vs theoretical decay envelopes for an evolved shear flow."""

    t: float
    T: float
    c_tilde1: float
    c_tilde2: float
    measured_min: float
    measured_max: float
    envelope_pass: bool
    deriv_bounds: dict  # p -> (measured sup, allowed c_tilde3)
    deriv_pass: bool

    @property
    def passed(self):
        return self.envelope_pass and self.deriv_pass


def verify_decay_bounds(evo, profile, T, y_max=None):
    """Check the evolved envelopes against the (1+T)-inflated constants."""
    if evo.t > T:
        raise ParameterError("evolution time exceeds the quoted horizon T")
    k = profile.k
    ct0 = 2.0 ** (-k / 2.0)
    ct1 = profile.c1 * ct0 * (1.0 + T) ** (-k / 2.0)
    ct2 = profile.c2 / ct0 * (1.0 + T) ** (k / 2.0)
    mask = np.ones_like(evo.y, dtype=bool) if y_max is None else evo.y <= y_max
    wk = (1.0 + evo.y[mask] ** 2) ** (k / 2.0)
    env = evo.deriv(1)[mask] * wk
    mmin, mmax = float(env.min()), float(env.max())
    deriv_bounds = {}
    ok = True
    for p in range(2, evo.values.shape[0]):
        wp = (1.0 + evo.y[mask] ** 2) ** ((k + p - 1.0) / 2.0)
        sup = float(np.max(np.abs(evo.deriv(p)[mask]) * wp))
        allowed = profile.c3 / ct0 * (1.0 + T) ** ((k + p - 1.0) / 2.0)
        deriv_bounds[p] = (sup, allowed)
        ok = ok and sup <= allowed
    return ShearDecayReport(evo.t, T, ct1, ct2, mmin, mmax,
                            ct1 <= mmin and mmax <= ct2, deriv_bounds, ok)


# -- independent 1D reference solver -------------------------------------------


def crank_nicolson_shear(profile, p, times, Ymax=40.0, Ny=4001, dt=2.5e-4):
    """Crank-Nicolson solve of v_t = v_yy for v = dy^p u^s on a uniform grid.

    Boundary conditions follow the reflection parity: Dirichlet v(0) = 0 for
    even p, Neumann dv/dy(0) = 0 for odd p; the far boundary holds its initial
    value.  Returns (y, {t: v(t, .)}).
    """
    times = sorted(times)
    y = np.linspace(0.0, Ymax, Ny)
    h = y[1] - y[0]
    v = profile.eval(y, p)
    top = v[-1]
    r = dt / (2.0 * h * h)
    n = Ny
    lower = np.full(n, -r)
    diag = np.full(n, 1.0 + 2.0 * r)
    upper = np.full(n, -r)
    if p % 2 == 0:
        diag[0], upper[0], lower[0] = 1.0, 0.0, 0.0
    else:
        upper[0] = -2.0 * r  # ghost symmetry for the Neumann condition
    diag[-1], lower[-1] = 1.0, 0.0
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1, :] = diag
    ab[2, :-1] = lower[1:]
    out = {}
    t = 0.0
    idx = 0
    while idx < len(times):
        if abs(t - times[idx]) < dt / 2.0:
            out[times[idx]] = v.copy()
            idx += 1
            continue
        rhs = v.copy()
        rhs[1:-1] = v[1:-1] + r * (v[2:] - 2.0 * v[1:-1] + v[:-2])
        if p % 2 == 0:
            rhs[0] = 0.0
        else:
            rhs[0] = v[0] + r * (2.0 * v[1] - 2.0 * v[0])
        rhs[-1] = top
        v = solve_banded((1, 1), ab, rhs)
        t += dt
    return y, out


class ShearFlow:
    """Grid-sampled accessor for an evolving shear flow, cached per (t, p)."""

    def __init__(self, profile, grid, n_quad=_N_QUAD):
        self.profile = profile
        self.grid = grid
        self.n_quad = n_quad
        self._cache = {}

    def at(self, t, p):
        key = (float(t), p)
        if key not in self._cache:
            self._cache[key] = evolve_heat_derivative(
                self.profile, t, p, self.grid.y, self.n_quad)
        return self._cache[key]

    def evolution(self, t, T_ref, orders=None):
        return evolve_heat(self.profile, t, self.grid, T_ref, orders, self.n_quad)
