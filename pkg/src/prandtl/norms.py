"""Weighted Sobolev norms on the grid and the ratio checks behind the
Hardy / trace / sup-norm inequalities used throughout the energy estimates.

The norm of order n with weight lambda is
    ||f||^2 = sum_{a1+a2<=n} ||<y>^(lambda+a2) dx^a1 dy^a2 f||_L2^2,
i.e. every y-derivative picks up one extra power of the weight.  The
anisotropic variant drops the single pure-x top term (a1=n, a2=0); the
decomposition  full^2 = aniso^2 + top^2  holds bitwise because the total is
accumulated in that order.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .grid import Field2D, dx_values, dy_values, smooth_step, weight_values


@dataclass
class SobolevParams:
    """Regularity / weight parameters shared by the solver and monitors."""

    m: int = 2
    k: float = 3.0
    ell: float = 0.4
    ell_prime: float = 0.7
    delta: float = 0.1
    strict_paper_mode: bool = False

    def __post_init__(self):
        if self.m < 2 or self.m % 2:
            raise ParameterError("m must be an even integer >= 2")
        if self.k <= 1.0:
            raise ParameterError("k must exceed 1")
        if not 0.0 < self.ell < 0.5:
            raise ParameterError("ell must lie in (0, 1/2)")
        if not (0.5 < self.ell_prime < self.ell + 0.5):
            raise ParameterError("ell_prime must lie in (1/2, ell + 1/2)")
        if self.delta <= 0.0:
            raise ParameterError("delta must be positive")
        if self.strict_paper_mode:
            if self.m < 6:
                raise ParameterError("strict paper mode needs m >= 6")
            if self.k + self.ell <= 1.5:
                raise ParameterError("strict paper mode needs k + ell > 3/2")

    @property
    def lam(self):
        """Weight exponent k + ell of the vorticity space."""
        return self.k + self.ell


@dataclass
class NormBreakdown:
    """Per-multi-index contributions ||<y>^(lam+a2) dx^a1 dy^a2 f||^2."""

    contributions: dict
    m: int
    lam: float

    @property
    def aniso_sq(self):
        return sum(v for k, v in self.contributions.items() if k != (self.m, 0))

    @property
    def top_sq(self):
        return self.contributions.get((self.m, 0), 0.0)

    @property
    def total(self):
        return self.aniso_sq + self.top_sq


def _quad_sq(grid, vals):
    return grid.wx * np.dot(np.sum(vals * vals, axis=0), grid.quad_weights)


def norm_L2_weighted(f, lam):
    """sqrt of the <y>^lam weighted L2 integral of f over the domain."""
    w = weight_values(f.grid, lam)
    return float(np.sqrt(_quad_sq(f.grid, f.values * w)))


def norm_Hm_weighted(f, m, lam):
    """Breakdown of the order-m weighted norm over all multi-indices."""
    g = f.grid
    contributions = {}
    # precompute pure-x derivatives once; then take y-derivatives of each
    xd = {0: f.values}
    for a1 in range(1, m + 1):
        xd[a1] = dx_values(g, f.values, a1)
    order = [(a1, a2) for a1 in range(m + 1) for a2 in range(m + 1 - a1)]
    order.remove((m, 0))
    order.append((m, 0))
    for a1, a2 in order:
        vals = xd[a1] if a2 == 0 else dy_values(g, xd[a1], a2)
        w = weight_values(g, lam + a2)
        contributions[(a1, a2)] = float(_quad_sq(g, vals * w))
    return NormBreakdown(contributions, m, lam)


def norm_Hm(f, m, lam):
    return float(np.sqrt(norm_Hm_weighted(f, m, lam).total))


def norm_anisotropic(f, m, lam):
    """Order-m weighted norm without the pure dx^m term (needs m >= 1)."""
    if m < 1:
        raise ParameterError("anisotropic norm needs m >= 1")
    return float(np.sqrt(norm_Hm_weighted(f, m, lam).aniso_sq))


def _far_field_window(grid, lo=0.75, hi=0.95):
    """Taper equal to 1 below lo*Ymax and 0 above hi*Ymax."""
    y = grid.y
    return 1.0 - smooth_step((y - lo * grid.Ymax) / ((hi - lo) * grid.Ymax))


def check_hardy(f, lam, variant="decay"):
    """Ratio ||<y>^lam f|| / ||<y>^(lam+1) dy f|| for the Hardy inequality.

    variant="decay" needs lam > -1/2 (f is tapered to vanish at Ymax);
    variant="boundary" needs -1 <= lam < -1/2 and f(x, 0) = 0.
    Returns 0 for f identically zero.
    """
    g = f.grid
    if variant == "decay":
        if lam <= -0.5:
            raise ParameterError("decay variant needs lam > -1/2")
        vals = f.values * _far_field_window(g)
    elif variant == "boundary":
        if not -1.0 <= lam < -0.5:
            raise ParameterError("boundary variant needs -1 <= lam < -1/2")
        if np.max(np.abs(f.values[:, 0])) > 1e-12 * max(1.0, np.max(np.abs(f.values))):
            raise ParameterError("boundary variant needs f(x, 0) = 0")
        vals = f.values
    else:
        raise ParameterError(f"unknown Hardy variant {variant!r}")
    fw = Field2D(g, vals)
    num = norm_L2_weighted(fw, lam)
    if num == 0.0:
        return 0.0
    den = norm_L2_weighted(Field2D(g, dy_values(g, vals, 1)), lam + 1.0)
    return num / den if den > 0.0 else np.inf


def check_trace(f, lam):
    """Ratio ||f(., 0)||_L2(x) / ||<y>^lam dy f|| for the trace inequality."""
    if lam <= 0.5:
        raise ParameterError("trace check needs lam > 1/2")
    g = f.grid
    num = float(np.sqrt(g.wx * np.sum(f.values[:, 0] ** 2)))
    if num == 0.0:
        return 0.0
    den = norm_L2_weighted(Field2D(g, dy_values(g, f.values, 1)), lam)
    return num / den if den > 0.0 else np.inf


def check_sobolev_embedding(f, delta):
    """Ratio ||f||_inf / (||f_y||_{1/2+delta} + ||f_xy||_{1/2+delta}).

    Requires f to vanish on one side (wall or far field).
    """
    if delta <= 0.0:
        raise ParameterError("delta must be positive")
    g = f.grid
    scale = max(1.0, float(np.max(np.abs(f.values))))
    wall0 = np.max(np.abs(f.values[:, 0])) <= 1e-10 * scale
    far0 = np.max(np.abs(f.values[:, -1])) <= 1e-10 * scale
    if not (wall0 or far0):
        raise ParameterError("need f(x,0)=0 or f(x,Ymax)=0")
    num = float(np.max(np.abs(f.values)))
    if num == 0.0:
        return 0.0
    fy = dy_values(g, f.values, 1)
    fxy = dy_values(g, dx_values(g, f.values, 1), 1)
    lam = 0.5 + delta
    den = norm_L2_weighted(Field2D(g, fy), lam) + norm_L2_weighted(Field2D(g, fxy), lam)
    return num / den if den > 0.0 else np.inf
