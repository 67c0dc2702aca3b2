"""Command line entry point and the three headline experiments.

    prandtl run        --config cfg.json [--out DIR]
    prandtl lifespan   --config cfg.json [--out DIR]
    prandtl stability  --config cfg.json [--out DIR]
    prandtl sweep-eps  --config cfg.json [--out DIR]
    prandtl verify {shear,compat,inequalities,transform} [--out DIR]

Exit codes: 0 ok, 1 property FAIL, 2 usage/config error, 3 numerical blow-up.
PRANDTL_THREADS caps the worker pool for sweeps.  CSV outputs are
deterministic for a fixed config and build; manifests record the config
snapshot and every measured constant an experiment used.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .data import compatible_perturbation, normalized_perturbation
from .errors import BlowupError, CompatibilityError, ParameterError
from .grid import Field2D, GridSpec
from .norms import SobolevParams, norm_Hm
from .shear import ShearFlow, builtin_profile
from .solver import SolverConfig, run, save_checkpoint
from .transform import gronwall_monitor
from .verify import SUITES

_GRID_DEFAULTS = dict(Nx=32, Lx=2.0 * np.pi, Ny=128, Ymax=12.0, alpha=3.0)
_SOLVER_DEFAULTS = dict(dt=1e-3, scheme="imex_euler", sample_every=10)


@dataclass
class RunConfig:
    grid: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    eps: float = 1e-3
    delta0: float = 1e-3
    T: float = 1.0
    seeds: list = field(default_factory=lambda: [0])
    outdir: str = "out"
    compat_override: bool = False
    lifespan: dict = field(default_factory=dict)
    stability: dict = field(default_factory=dict)
    sweep_eps: dict = field(default_factory=dict)

    @staticmethod
    def load(path, strict=False):
        raw = {}
        if path is not None:
            with open(path) as fh:
                raw = json.load(fh)
        if "config" in raw and "version" in raw:
            raw = raw["config"]  # a manifest re-runs with its own snapshot
        known = {f for f in RunConfig.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        cfg = RunConfig(**raw)
        if strict:
            cfg.params["strict_paper_mode"] = True
        return cfg

    def make_grid(self):
        spec = dict(_GRID_DEFAULTS)
        spec.update(self.grid)
        return GridSpec.make(**spec)

    def make_params(self):
        return SobolevParams(**self.params)

    def make_solver(self):
        kw = dict(_SOLVER_DEFAULTS)
        kw.update(self.solver)
        return SolverConfig(**kw)


def _workers():
    env = os.environ.get("PRANDTL_THREADS")
    return max(1, int(env)) if env else min(4, os.cpu_count() or 1)


def _pool_map(fn, items):
    if len(items) <= 1 or _workers() == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        return list(pool.map(fn, items))


def _prepare(cfg):
    grid = cfg.make_grid()
    params = cfg.make_params()
    prof = builtin_profile(params.k, params.m)
    return grid, params, prof


def _make_data(grid, prof, delta0, params):
    if delta0 == 0.0:
        return compatible_perturbation(grid, prof, 0.0)
    return normalized_perturbation(grid, prof, delta0, params)


def _write_manifest(outdir, cfg, extra):
    snapshot = asdict(cfg)
    canonical = json.dumps(snapshot, sort_keys=True, default=float)
    manifest = {
        "version": __version__,
        "config": snapshot,
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "wall_time_s": extra.pop("_wall_time", None),
    }
    manifest.update(extra)
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=float)
    return path


def cmd_run(cfg, outdir):
    grid, params, prof = _prepare(cfg)
    scfg = cfg.make_solver()
    data = _make_data(grid, prof, cfg.delta0, params)
    t0 = time.time()
    result = run(scfg, data.u, prof, cfg.eps, cfg.T, params, w0=data.w,
                 compat_override=cfg.compat_override)
    result.report.to_csv(os.path.join(outdir, "energy.csv"))
    save_checkpoint(result.states[-1], os.path.join(outdir, "final.npz"))
    fit = gronwall_monitor(result.report)
    _write_manifest(outdir, cfg, {
        "_wall_time": time.time() - t0,
        "measured": result.measured,
        "stop_reason": result.stop_reason,
        "stop_time": result.stop_time,
        "fits": {"C1": fit.C1_fit, "C2": fit.C2_fit, "CT": fit.CT_fit},
    })
    print(f"run: stop={result.stop_reason} at t={result.stop_time:.4f}")
    return 0


def _linear_fit(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2


def cmd_lifespan(cfg, outdir):
    grid, params, prof = _prepare(cfg)
    scfg = cfg.make_solver()
    opts = cfg.lifespan
    delta0s = opts.get("delta0_list", [1e-2, 1e-3, 1e-4, 1e-5])
    if any(b >= a for a, b in zip(delta0s, delta0s[1:])):
        raise ParameterError("delta0_list must be decreasing")
    t_cap = float(opts.get("t_cap", 8.0))
    flow = ShearFlow(prof, grid)

    def one(delta0):
        data = _make_data(grid, prof, delta0, params)
        res = run(scfg, data.u, flow, cfg.eps, t_cap, params, w0=data.w,
                  keep_states=False, window_schedule="running")
        capped = res.stop_reason == "reached-T"
        return {"delta0": delta0, "T_star": res.stop_time,
                "stop_reason": "unbounded-at-resolution" if capped else res.stop_reason}

    t0 = time.time()
    rows = _pool_map(one, delta0s)
    usable = [r for r in rows if r["stop_reason"] != "unbounded-at-resolution"]
    fit = {}
    if len(usable) >= 2:
        slope, intercept, r2 = _linear_fit(
            [np.log(1.0 / r["delta0"]) for r in usable],
            [r["T_star"] for r in usable])
        fit = {"slope": slope, "intercept": intercept, "r_squared": r2}
    with open(os.path.join(outdir, "lifespan.csv"), "w") as fh:
        fh.write("delta0,T_star,stop_reason\n")
        for r in rows:
            fh.write(f"{r['delta0']!r},{r['T_star']!r},{r['stop_reason']}\n")
    _write_manifest(outdir, cfg, {"_wall_time": time.time() - t0,
                                  "lifespan": rows, "fit": fit})
    for r in rows:
        print(f"lifespan: delta0={r['delta0']:.1e} T*={r['T_star']:.4f} ({r['stop_reason']})")
    if fit:
        print(f"lifespan fit: T* ~ {fit['slope']:.3f} log(1/delta0) "
              f"{fit['intercept']:+.3f} (R^2={fit['r_squared']:.3f})")
    return 0


def _state_u_diff_norm(sa, sb, order, lam):
    return norm_Hm(Field2D(sa.grid, sa.u - sb.u), order, lam)


def cmd_stability(cfg, outdir):
    grid, params, prof = _prepare(cfg)
    scfg = cfg.make_solver()
    gap = float(cfg.stability.get("gap", 1e-4))
    order = max(params.m - 3, 0)
    lam = params.k + params.ell - 1.0
    flow = ShearFlow(prof, grid)

    def ratio_for(gap_):
        d1 = _make_data(grid, prof, cfg.delta0, params)
        d2 = _make_data(grid, prof, cfg.delta0 * (1.0 + gap_), params)
        r1 = run(scfg, d1.u, flow, cfg.eps, cfg.T, params, w0=d1.w)
        r2 = run(scfg, d2.u, flow, cfg.eps, cfg.T, params, w0=d2.w)
        partial = (r1.stop_reason != "reached-T") or (r2.stop_reason != "reached-T")
        npair = min(len(r1.states), len(r2.states))
        d0 = _state_u_diff_norm(r1.states[0], r2.states[0], order, lam)
        dmax = max(_state_u_diff_norm(r1.states[i], r2.states[i], order, lam)
                   for i in range(npair))
        return {"gap": gap_, "D0": d0, "sup_D": dmax, "R": dmax / d0,
                "partial": partial,
                "stop_reasons": [r1.stop_reason, r2.stop_reason]}

    t0 = time.time()
    res = [ratio_for(gap), ratio_for(gap / 10.0)]
    drift = abs(res[1]["R"] - res[0]["R"]) / res[0]["R"]
    _write_manifest(outdir, cfg, {"_wall_time": time.time() - t0,
                                  "stability": res, "R_drift": drift})
    for r in res:
        print(f"stability: gap={r['gap']:.1e} R={r['R']:.4f} partial={r['partial']}")
    print(f"stability: R drift across gap/10 = {drift:.3f}")
    return 0


def cmd_sweep_eps(cfg, outdir):
    grid, params, prof = _prepare(cfg)
    scfg = cfg.make_solver()
    eps_list = cfg.sweep_eps.get("eps_list", [1e-2, 1e-3, 1e-4])
    if len(eps_list) < 3:
        raise ParameterError("sweep-eps needs at least 3 eps values")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ParameterError("eps_list must be decreasing")
    flow = ShearFlow(prof, grid)
    data = _make_data(grid, prof, cfg.delta0, params)

    def one(eps):
        return run(scfg, data.u, flow, eps, cfg.T, params, w0=data.w)

    t0 = time.time()
    results = _pool_map(one, eps_list)
    lam = params.k + params.ell
    dists = []
    for ra, rb in zip(results, results[1:]):
        diff = Field2D(grid, ra.states[-1].w - rb.states[-1].w)
        dists.append(norm_Hm(diff, 0, lam))
    fit = gronwall_monitor(results[0].report, [r.report for r in results])
    rows = []
    for eps, res in zip(eps_list, results):
        f = gronwall_monitor(res.report)
        rows.append({"eps": eps, "C1": f.C1_fit, "C2": f.C2_fit,
                     "stop_reason": res.stop_reason})
    with open(os.path.join(outdir, "eps_sweep.csv"), "w") as fh:
        fh.write("eps,C1,C2,dist_to_next\n")
        for i, r in enumerate(rows):
            d = dists[i] if i < len(dists) else ""
            fh.write(f"{r['eps']!r},{r['C1']!r},{r['C2']!r},{d!r}\n")
    _write_manifest(outdir, cfg, {
        "_wall_time": time.time() - t0,
        "sweep": rows,
        "pairwise_distances": dists,
        "cauchy_trend_decreasing": all(b < a for a, b in zip(dists, dists[1:])),
        "spread_C1": fit.spread_C1, "spread_C2": fit.spread_C2,
    })
    print(f"sweep-eps: distances {['%.3e' % d for d in dists]}, "
          f"C1 spread {fit.spread_C1:.3f}, C2 spread {fit.spread_C2:.3f}")
    return 0


def cmd_verify(what, outdir):
    if what not in SUITES:
        print(f"unknown verify suite {what!r}; choose from {sorted(SUITES)}",
              file=sys.stderr)
        return 2
    ok, details = SUITES[what]()
    verdict = {"suite": what, "passed": bool(ok), "details": details}
    text = json.dumps(verdict, indent=2, sort_keys=True, default=float)
    print(text)
    if outdir:
        with open(os.path.join(outdir, f"verify_{what}.json"), "w") as fh:
            fh.write(text + "\n")
    return 0 if ok else 1


def main(argv=None):
    parser = argparse.ArgumentParser(prog="prandtl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "lifespan", "stability", "sweep-eps"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--strict-paper-mode", action="store_true")
    pv = sub.add_parser("verify")
    pv.add_argument("what")
    pv.add_argument("--config", default=None)
    pv.add_argument("--out", default=None)
    pv.add_argument("--strict-paper-mode", action="store_true")
    args = parser.parse_args(argv)

    if args.command == "verify":
        outdir = args.out
        if outdir:
            os.makedirs(outdir, exist_ok=True)
        return cmd_verify(args.what, outdir)

    try:
        if args.config is not None and not os.path.exists(args.config):
            print(f"config file not found: {args.config}", file=sys.stderr)
            return 2
        cfg = RunConfig.load(args.config, strict=args.strict_paper_mode)
        outdir = args.out or cfg.outdir
        os.makedirs(outdir, exist_ok=True)
        handler = {"run": cmd_run, "lifespan": cmd_lifespan,
                   "stability": cmd_stability, "sweep-eps": cmd_sweep_eps}[args.command]
        return handler(cfg, outdir)
    except (ParameterError, ValueError, TypeError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CompatibilityError as exc:
        print(f"initial data rejected: {exc}", file=sys.stderr)
        return 2
    except BlowupError as exc:
        print(f"numerical blow-up: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
