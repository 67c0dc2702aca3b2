"""The monotone transformation g_n = dy(dx^n u / (u^s_y + u_y)), its source
terms, the monotonicity window, and the energy / Gronwall monitors.

Under the window (c1~/4) <y>^-k <= u^s_y + u_y <= 4 c2~ <y>^-k the division is
safe and the g_n equation has no derivative-loss term; the monitors record the
weighted energies whose differential inequalities the estimates assert, and
fit the constants those inequalities would carry.

The top x-derivative is recovered from g_m by the product rule,
    dx^m w = (u^s_yy + w_y) int_0^y g_m + (u^s_y + w) g_m,
with a plus sign on the second term (cross-checked against the direct
spectral derivative).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import MonotonicityError, ParameterError
from .grid import Field2D, dx_values, dy_values, weight_values
from .norms import NormBreakdown, norm_Hm_weighted, norm_L2_weighted
from .solver import boundary_defect


@dataclass
class TransformFields:
    """g_n, their antiderivatives, and the two logarithmic-derivative ratios."""

    m: int
    g: list  # Field2D, index n = 0..m
    ginv: list  # Field2D, dx^n u / (u^s_y + u_y)
    eta1: Field2D
    eta2: Field2D
    denom: np.ndarray


@dataclass
class MonotonicityWindow:
    c_tilde1: float
    c_tilde2: float
    Cm_est: float
    zeta: float
    k: float
    # pointwise margins are checked for y <= y_frac * Ymax: further out the
    # lower envelope sits at or below the rounding floor of the evolved shear
    y_frac: float = 0.75


@dataclass
class GronwallFit:
    C1_fit: float
    C2_fit: float
    CT_fit: float
    degenerate: bool
    per_run_C1: list
    per_run_C2: list
    spread_C1: float
    spread_C2: float


_embed_cache = {}


def estimate_embedding_constant(grid, params, n_fields=200, seed=0):
    """Empirical constant in sup |<y>^(k+l) f| <= C_m ||f||_{H^m_{k+l}}.

    Measured as the max ratio over a bank of smooth decaying fields that
    includes near-extremal candidates (weight-cancelling bumps of varying
    width and position, at low x-frequencies), then frozen per
    (grid, params) and recorded in run manifests.
    """
    key = (grid, params.m, params.k, params.ell)
    if key not in _embed_cache:
        rng = np.random.default_rng(seed)
        lam = params.k + params.ell
        wlam = weight_values(grid, lam)
        best = 0.0
        for vals in _embedding_bank(grid, rng, lam, n_fields):
            f = Field2D(grid, vals)
            sup = float(np.max(np.abs(vals * wlam)))
            nrm = math.sqrt(norm_Hm_weighted(f, params.m, lam).total)
            if nrm > 0.0:
                best = max(best, sup / nrm)
        _embed_cache[key] = best
    return _embed_cache[key]


def _embedding_bank(grid, rng, lam, n_fields):
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    # weight-cancelling bumps: sup |<y>^lam f| is O(1) while the weighted
    # derivatives stay as small as the bump is wide
    for y0 in (0.5, 1.0, 2.0, 4.0, 6.0):
        for width in (0.5, 1.0, 2.0, 3.0):
            for q in (0, 1):
                prof = (1.0 + Y**2) ** (-lam / 2.0) * np.exp(-((Y - y0) / width) ** 2)
                yield np.cos(q * 2.0 * np.pi / grid.Lx * X) * prof
    for _ in range(n_fields):
        vals = np.zeros_like(X)
        for _ in range(4):
            q = rng.integers(0, max(2, grid.Nx // 4))
            phase = rng.uniform(0.0, 2.0 * np.pi)
            amp = rng.normal()
            beta = rng.uniform(0.5, 2.0)
            gam = rng.uniform(-1.0, 1.0)
            vals += amp * np.cos(q * 2.0 * np.pi / grid.Lx * X + phase) \
                * Y * (1.0 + gam * Y) * np.exp(-beta * Y)
        yield vals


def shear_envelope_sup(shear, grid, T, y_frac=0.75, nt=9):
    """Measured sup over t <= T, y <= y_frac Ymax of dy u^s <y>^k."""
    from .shear import evolve_heat_derivative

    mask = grid.y <= y_frac * grid.Ymax
    wk = weight_values(grid, shear.k)[mask]
    sup = float(np.max(shear.eval(grid.y[mask], 1) * wk))
    for t in np.linspace(0.0, T, nt)[1:]:
        usy = evolve_heat_derivative(shear, t, 1, grid.y[mask])
        sup = max(sup, float(np.max(usy * wk)))
    return sup


def make_window(shear, grid, params, T, Cm=None, shear_env_sup=None):
    """Window constants for horizon T plus the admissible perturbation size.

    The upper constant is the larger of the quoted (1+T)^(k/2) envelope and
    1.1x the measured shear envelope when a measurement is supplied: the
    quoted prefactor drops the k-th Gaussian moment of the kernel, which for
    fast-decaying profiles (k >= 8) transiently exceeds the nominal 4x slack.
    """
    k = shear.k
    ct0 = 2.0 ** (-k / 2.0)
    ct1 = shear.c1 * ct0 * (1.0 + T) ** (-k / 2.0)
    ct2 = shear.c2 / ct0 * (1.0 + T) ** (k / 2.0)
    if shear_env_sup is not None:
        ct2 = max(ct2, 1.1 * shear_env_sup)
    if Cm is None:
        Cm = estimate_embedding_constant(grid, params)
    return MonotonicityWindow(ct1, ct2, Cm, ct1 / (4.0 * Cm), k)


def check_monotonicity(state, window):
    """(pass, margin): margin is the worst pointwise slack of the window."""
    g = state.grid
    usy = state.shear_flow.at(state.t, 1)
    denom = usy[None, :] + state.w
    wk = weight_values(g, -window.k)
    lower = denom - 0.25 * window.c_tilde1 * wk
    upper = 4.0 * window.c_tilde2 * wk - denom
    mask = g.y <= window.y_frac * g.Ymax
    margin = float(min(lower[:, mask].min(), upper[:, mask].min()))
    return margin >= 0.0, margin


def compute_transform(state, m, window=None):
    """All g_n, n = 0..m, with the guarded denominator; raises when the
    monotonicity window fails."""
    g = state.grid
    usy = state.shear_flow.at(state.t, 1)
    usyy = state.shear_flow.at(state.t, 2)
    denom = usy[None, :] + state.w
    if window is not None:
        ok, margin = check_monotonicity(state, window)
        if not ok:
            raise MonotonicityError(f"window margin {margin:.3e} < 0 at t={state.t:.4f}")
    elif denom.min() <= 0.0:
        raise MonotonicityError("u^s_y + u_y lost positivity")
    gs, ginvs = [], []
    for n in range(m + 1):
        xnu = state.u if n == 0 else dx_values(g, state.u, n)
        ginv = xnu / denom
        gs.append(Field2D(g, dy_values(g, ginv, 1)))
        ginvs.append(Field2D(g, ginv))
    eta1 = Field2D(g, dx_values(g, state.w, 1) / denom)
    eta2 = Field2D(g, (usyy[None, :] + dy_values(g, state.w, 1)) / denom)
    return TransformFields(m, gs, ginvs, eta1, eta2, denom)


def compute_M_terms(state, tf, n):
    """The six source blocks of the g_n equation, in the order
    (advective-eta1 coupling, eta2 block, eps block, time-coupling block,
    A^1_n commutator, A^2_n commutator).

    The eta2 / eps blocks are the product-rule expansions of
    dy(dy^2 dx^n u / D) and dy(dx^2 dx^n u / D) with D = u^s_y + u_y; all
    quotient-rule cross terms (g eta2^2, ginv eta2 dy(eta2) and the eps
    analogues) cancel identically in those expansions, which is what makes
    the residual of the g_n equation vanish under refinement."""
    g = state.grid
    eps = state.eps
    us0 = state.shear_flow.at(state.t, 0)
    usyy = state.shear_flow.at(state.t, 2)
    total_u = us0[None, :] + state.u
    gn = tf.g[n].values
    ginv = tf.ginv[n].values
    e1 = tf.eta1.values
    e2 = tf.eta2.values
    de1 = dy_values(g, e1, 1)
    de2 = dy_values(g, e2, 1)
    m1 = -total_u * (gn * e1 + ginv * de1)
    m2 = 2.0 * dy_values(g, gn, 1) * e2 + 2.0 * gn * de2
    m3 = 2.0 * eps * dx_values(g, gn, 1) * e1
    wx = dx_values(g, state.w, 1)
    wy = dy_values(g, state.w, 1)
    m4 = dy_values(g, ginv * (total_u * wx + state.v * (wy + usyy[None, :])) / tf.denom, 1)
    a1 = np.zeros_like(gn)
    a2 = np.zeros_like(gn)
    for i in range(1, n + 1):
        cni = float(math.comb(n, i))
        a1 += cni * dx_values(g, state.u, i) * dx_values(g, state.u, n + 1 - i)
        a2 += cni * dx_values(g, state.w, i) * dx_values(g, state.v, n - i)
    m5 = -dy_values(g, a1 / tf.denom, 1)
    m6 = -dy_values(g, a2 / tf.denom, 1)
    return [Field2D(g, m) for m in (m1, m2, m3, m4, m5, m6)]


def residual_g_equation(state_a, state_b, n, dt_probe, params, window=None):
    """L2_{l'} residual of the g_n equation between two consecutive states,
    with the time derivative replaced by the forward difference."""
    g = state_a.grid
    tf_a = compute_transform(state_a, n, window)
    tf_b = compute_transform(state_b, n, window)
    us0 = state_a.shear_flow.at(state_a.t, 0)
    gn_a = tf_a.g[n].values
    dtg = (tf_b.g[n].values - gn_a) / dt_probe
    lhs = dtg + (us0[None, :] + state_a.u) * dx_values(g, gn_a, 1)
    lhs -= dy_values(g, gn_a, 2)
    lhs -= state_a.eps * dx_values(g, gn_a, 2)
    de1 = dy_values(g, tf_a.eta1.values, 1)
    lhs -= 2.0 * state_a.eps * dx_values(g, tf_a.ginv[n].values, 1) * de1
    rhs = sum(m.values for m in compute_M_terms(state_a, tf_a, n))
    return norm_L2_weighted(Field2D(g, lhs - rhs), params.ell_prime)


def recover_top_derivative(tf, state):
    """dx^m w rebuilt from g_m by the product rule (plus sign, see module
    docstring); agrees with the direct spectral derivative on smooth data."""
    g = state.grid
    usy = state.shear_flow.at(state.t, 1)
    usyy = state.shear_flow.at(state.t, 2)
    cum = g.cumulative_matrix()
    gm = tf.g[tf.m].values
    int_gm = gm @ cum.T
    wy = dy_values(g, state.w, 1)
    vals = (usyy[None, :] + wy) * int_gm + (usy[None, :] + state.w) * gm
    return Field2D(g, vals)


# -- energy monitoring ------------------------------------------------------------


_COLUMNS = ("E_aniso", "E_g", "E_top", "D_aniso", "D_g", "margin", "f_defect")


@dataclass
class EnergyReport:
    """Time series of the tracked weighted energies for one run."""

    times: np.ndarray
    series: dict
    u0_norm: float
    m: int

    @staticmethod
    def from_rows(rows, u0_norm, params):
        times = np.array([r["t"] for r in rows])
        series = {c: np.array([r[c] for r in rows]) for c in _COLUMNS}
        return EnergyReport(times, series, u0_norm, params.m)

    def norm_w(self):
        return np.sqrt(self.series["E_aniso"] + self.series["E_top"])

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t," + ",".join(_COLUMNS) + "\n")
            for i, t in enumerate(self.times):
                row = [repr(float(t))]
                row += [repr(float(self.series[c][i])) for c in _COLUMNS]
                fh.write(",".join(row) + "\n")

    @staticmethod
    def from_csv(path):
        data = np.genfromtxt(path, delimiter=",", names=True)
        series = {c: np.atleast_1d(data[c]) for c in _COLUMNS}
        return EnergyReport(np.atleast_1d(data["t"]), series, np.nan, 0)


def initial_data_norm(u0, params):
    """Initial-data norm against which the run energy is calibrated."""
    lam = params.k + params.ell_prime - 1.0
    return math.sqrt(norm_Hm_weighted(u0, params.m + 1, lam).total)


def record_energy(state, params, window, tail_rate):
    """One sample row of all tracked quantities at the state's time."""
    g = state.grid
    m = params.m
    lam = params.k + params.ell
    wf = Field2D(g, state.w)
    bd = norm_Hm_weighted(wf, m, lam)
    bdy = norm_Hm_weighted(Field2D(g, dy_values(g, state.w, 1)), m, lam)
    ok, margin = check_monotonicity(state, window)
    row = {
        "t": state.t,
        "E_aniso": bd.aniso_sq,
        "E_top": bd.top_sq,
        "D_aniso": bdy.aniso_sq,
        "margin": margin,
        "f_defect": boundary_defect(g, state.w, tail_rate),
        "E_g": np.nan,
        "D_g": np.nan,
    }
    if ok:
        tf = compute_transform(state, m, window)
        lp = params.ell_prime
        row["E_g"] = sum(norm_L2_weighted(tf.g[n], lp) ** 2 for n in range(1, m + 1))
        row["D_g"] = sum(
            norm_L2_weighted(Field2D(g, dy_values(g, tf.g[n].values, 1)), lp) ** 2
            for n in range(1, m + 1))
    return row


def _lsq_ratio(lhs, basis):
    denom = float(np.dot(basis, basis))
    if denom == 0.0:
        return 0.0
    return max(0.0, float(np.dot(lhs, basis) / denom))


def gronwall_monitor(report, eps_runs=()):
    """Fit the constants of the three monitored differential inequalities.

    C1:  d/dt E_aniso + D_aniso <= C1 (E + E^{m/2}),
    C2:  d/dt E_g + D_g <= C2 (E_g + E),
    CT:  sup_t ||w(t)|| <= CT ||u0||.
    Least-squares scalars over the sampled series; across eps_runs the
    relative spreads of C1 and C2 are reported.
    """
    def fit_one(rep):
        t = rep.times
        E = rep.series["E_aniso"] + rep.series["E_top"]
        if len(t) < 2 or np.nanmax(E) <= 0.0:
            return 0.0, 0.0, 0.0, True
        dt = np.diff(t)
        lhs1 = np.diff(rep.series["E_aniso"]) / dt + rep.series["D_aniso"][:-1]
        basis1 = E[:-1] + E[:-1] ** (rep.m / 2.0)
        c1 = _lsq_ratio(lhs1, basis1)
        Eg = rep.series["E_g"]
        Dg = rep.series["D_g"]
        good = np.isfinite(Eg[:-1]) & np.isfinite(Eg[1:]) & np.isfinite(Dg[:-1])
        if np.any(good):
            lhs2 = (np.diff(Eg) / dt + Dg[:-1])[good]
            basis2 = (Eg[:-1] + E[:-1])[good]
            c2 = _lsq_ratio(lhs2, basis2)
        else:
            c2 = 0.0
        ct = float(np.max(np.sqrt(E)) / rep.u0_norm) if rep.u0_norm > 0.0 else 0.0
        return c1, c2, ct, False

    c1, c2, ct, degen = fit_one(report)
    per1, per2 = [], []
    for rep in eps_runs:
        a, b, _, d = fit_one(rep)
        if not d:
            per1.append(a)
            per2.append(b)

    def spread(vals):
        if len(vals) < 2 or np.mean(vals) == 0.0:
            return 0.0
        return float((np.max(vals) - np.min(vals)) / np.mean(vals))

    return GronwallFit(c1, c2, ct, degen, per1, per2, spread(per1), spread(per2))
