"""Batch property suites behind ``prandtl verify``.

Each suite returns (passed, details) where details is a JSON-ready dict of
the measured quantities; thresholds are desk-scale defaults documented in
the README and recorded next to every verdict.
"""

import numpy as np

from .compat import build_corrector, check_compat_order6_reg, numeric_compat_oracle
from .data import compatible_perturbation, incompatible_perturbation
from .grid import Field2D, GridSpec, dx, dy
from .norms import (
    SobolevParams,
    check_hardy,
    check_sobolev_embedding,
    check_trace,
    norm_L2_weighted,
)
from .shear import builtin_profile, crank_nicolson_shear, evolve_heat, verify_decay_bounds
from .solver import SolverConfig, make_state, run, step_imex
from .transform import compute_M_terms, compute_transform, recover_top_derivative, residual_g_equation


def _grid(cfg=None, **overrides):
    base = dict(Nx=32, Ny=192, Ymax=12.0)
    if cfg is not None:
        base.update(cfg)
    base.update(overrides)
    return GridSpec.make(**base)


def verify_shear(grid_cfg=None):
    """Decay envelopes (strict pointwise, y <= Ymax/2) and the independent
    Crank-Nicolson cross-check, for the builtin k=3 profile."""
    g = _grid(grid_cfg, Ny=256)
    prof = builtin_profile(3.0, m=2)
    details = {"profile": {"k": 3.0, "c1": prof.c1, "c2": prof.c2}}
    ok = True

    env = {}
    for t in (0.25, 0.5, 1.0):
        evo = evolve_heat(prof, t, g, T_ref=1.0)
        rep = verify_decay_bounds(evo, prof, T=1.0, y_max=g.Ymax / 2.0)
        env[str(t)] = {"min": rep.measured_min, "max": rep.measured_max,
                       "c_tilde1": rep.c_tilde1, "c_tilde2": rep.c_tilde2,
                       "pass": rep.passed}
        ok = ok and rep.passed
    details["envelope"] = env

    cn = {}
    yr, sols = {}, {}
    for p in (0, 1, 2):
        yr[p], sols[p] = crank_nicolson_shear(prof, p, [0.1, 0.5, 1.0],
                                              Ny=8001, dt=1e-4)
    for t in (0.1, 0.5, 1.0):
        for p in (0, 1, 2):
            num = evolve_heat(prof, t, g, T_ref=1.0, orders=[p]).deriv(p)
            ref = np.interp(g.y, yr[p], sols[p][t])
            scale = np.sqrt(np.sum(ref**2))
            rel = float(np.sqrt(np.sum((num - ref) ** 2)) / scale)
            cn[f"t={t},p={p}"] = rel
            ok = ok and rel <= 1e-4
    details["cn_rel_l2"] = cn
    details["cn_tolerance"] = 1e-4
    return ok, details


def verify_compat(grid_cfg=None):
    """Closed-form conditions through order 6, the corrector, and the
    dynamic oracle's compatible/violating separation."""
    g = _grid(grid_cfg)
    prof = builtin_profile(3.0, m=2)
    eps = 0.1
    data = compatible_perturbation(g, prof, 0.05)
    details = {}
    rep = check_compat_order6_reg(data.u, prof, 0.0)
    details["closed_form_residuals"] = {str(k): v for k, v in rep.residuals.items()}
    ok = rep.passed

    before = check_compat_order6_reg(data.u, prof, eps).residuals[6]
    corr = build_corrector(data.u, prof, eps, order=6)
    fixed = Field2D(g, data.u.values + eps * corr.field().values)
    after = check_compat_order6_reg(fixed, prof, eps).residuals[6]
    details["corrector"] = {"eps": eps, "residual6_before": before,
                            "residual6_after": after, "tolerance": 1e-8}
    ok = ok and after <= 1e-8 and before > 100.0 * after

    good = compatible_perturbation(g, prof, 0.2)
    bad = incompatible_perturbation(g, 0.2)
    r_good = numeric_compat_oracle(good.u, prof, 1e-3, 4)
    r_bad = numeric_compat_oracle(bad.u, prof, 1e-3, 4)
    sep = r_bad.rate / max(r_good.rate, 1e-300)
    details["oracle"] = {"rate_compatible": r_good.rate, "rate_violating": r_bad.rate,
                         "separation": sep, "required": 10.0}
    ok = ok and sep >= 10.0
    return ok, details


def verify_inequalities(grid_cfg=None, n_fields=100, seed=12):
    """Hardy / trace / sup-norm ratio suites on random smooth fields, with a
    10% stability requirement under one grid-refinement doubling.

    Each inequality gets fields meeting its side conditions: wall-vanishing
    for the Hardy (decay) and sup-norm checks, nonzero wall trace for the
    trace check.
    """
    g = _grid(grid_cfg, Ny=128)
    g2 = g.refined(rx=2, ry=2)
    details = {}
    ok = True

    def bank(grid, rng, wall_value):
        X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
        fields = []
        for _ in range(n_fields):
            q = int(rng.integers(0, 4))
            beta = rng.uniform(0.4, 1.5)
            amp = 0.1 + rng.random()
            phase = rng.uniform(0, 2 * np.pi)
            prof = (rng.uniform(0.5, 2.0) + Y) if wall_value else Y * (1.0 + rng.uniform(-0.8, 0.8) * Y)
            fields.append(Field2D(grid, amp * np.cos(q * 2 * np.pi / grid.Lx * X + phase)
                                  * prof * np.exp(-beta * Y)))
        return fields

    for name, check, wall_value in (
            ("hardy", lambda f: check_hardy(f, 0.3, "decay"), False),
            ("trace", lambda f: check_trace(f, 0.6), True),
            ("sobolev", lambda f: check_sobolev_embedding(f, 0.1), False)):
        ratios = [check(f) for f in bank(g, np.random.default_rng(seed), wall_value)]
        ratios2 = [check(f) for f in bank(g2, np.random.default_rng(seed), wall_value)]
        m1, m2 = float(np.max(ratios)), float(np.max(ratios2))
        drift = abs(m2 - m1) / m1
        details[name] = {"max_ratio": m1, "max_ratio_refined": m2,
                         "drift": drift, "allowed_drift": 0.10}
        ok = ok and np.isfinite(m1) and np.isfinite(m2) and drift <= 0.10
    return ok, details


def verify_transform(grid_cfg=None):
    """g-equation residual refinement, top-derivative recovery, and the exact
    eps-linearity of the M3 block."""
    g = _grid(grid_cfg, Ny=129)
    prof = builtin_profile(3.0, m=2)
    params = SobolevParams()
    eps = 1e-3
    details = {}
    ok = True

    def residuals(grid, dt, t_settle=0.1):
        d = compatible_perturbation(grid, prof, 1e-3)
        st = make_state(grid, prof, eps, 0.0, d.w.values)
        for _ in range(int(round(t_settle / dt))):
            st = step_imex(st, dt)
        st2 = step_imex(st, dt)
        return [residual_g_equation(st, st2, n, dt, params) for n in (1, 2)]

    g_fine = g.refined(ry=2)
    coarse = residuals(g, 4e-3)
    fine = residuals(g_fine, 2e-3)
    ratios = [c / f for c, f in zip(coarse, fine)]
    details["g_residual"] = {"coarse": coarse, "fine": fine, "ratios": ratios,
                             "required_ratio": 1.8}
    ok = ok and all(r >= 1.8 for r in ratios)

    g_rec = _grid(grid_cfg, Ny=257)
    data = compatible_perturbation(g_rec, prof, 1e-3)
    st = make_state(g_rec, prof, eps, 0.0, data.w.values)
    for _ in range(100):
        st = step_imex(st, 1e-3)
    tf = compute_transform(st, params.m)
    rec = recover_top_derivative(tf, st)
    direct = dx(st.field("w"), params.m)
    lam = params.k + params.ell
    rel = norm_L2_weighted(rec - direct, lam) / norm_L2_weighted(direct, lam)
    details["recover_top"] = {"rel_l2": rel, "tolerance": 1e-4}
    ok = ok and rel <= 1e-4

    m3_1 = compute_M_terms(st, tf, 1)[2]
    st2 = make_state(g_rec, prof, 2.0 * eps, st.t, st.w.copy())
    m3_2 = compute_M_terms(st2, compute_transform(st2, params.m), 1)[2]
    scale_err = float(np.max(np.abs(m3_2.values - 2.0 * m3_1.values)))
    details["m3_eps_scaling"] = {"max_abs_error": scale_err}
    ok = ok and scale_err <= 1e-14 * max(1.0, float(np.max(np.abs(m3_1.values))))
    return ok, details


SUITES = {
    "shear": verify_shear,
    "compat": verify_compat,
    "inequalities": verify_inequalities,
    "transform": verify_transform,
}
