"""Benchmark the compiled kernel core against the pure-numpy fallback.

    python benchmarks/bench_kernels.py

Times the two hot loops (batched tridiagonal solves, banded stencil apply)
at solver-representative sizes, plus a whole IMEX step with each backend.
"""

import os
import subprocess
import sys
import time

import numpy as np

from prandtl import _kernels
from prandtl._kernels import _numpy_impl


def _time(fn, *args, repeat=200):
    fn(*args)  # warm
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def bench_ops():
    rng = np.random.default_rng(0)
    rows = []
    for nb, n in ((34, 128), (34, 256), (130, 256)):
        dl = rng.uniform(-1, 0, (nb, n))
        du = rng.uniform(-1, 0, (nb, n))
        d = 2.5 + rng.random((nb, n))
        rhs = rng.normal(size=(nb, n))
        dl[:, 0] = du[:, -1] = 0.0
        t_np = _time(_numpy_impl.tridiag_solve_batch, dl, d, du, rhs)
        t_cy = (_time(_kernels._core.tridiag_solve_batch, dl, d, du, rhs)
                if _kernels._core is not None else float("nan"))
        rows.append(("tridiag", f"{nb}x{n}", t_np, t_cy))
    for nx, n, w in ((32, 128, 7), (32, 256, 7), (64, 256, 9)):
        coeffs = rng.normal(size=(n, w))
        start = rng.integers(0, n - w, size=n).astype(np.int64)
        f = rng.normal(size=(nx, n))
        t_np = _time(_numpy_impl.stencil_apply, coeffs, start, f)
        t_cy = (_time(_kernels._core.stencil_apply, coeffs, start, f)
                if _kernels._core is not None else float("nan"))
        rows.append(("stencil", f"{nx}x{n} w={w}", t_np, t_cy))
    return rows


def bench_step(force_numpy):
    """Time one IMEX step in a subprocess with the chosen backend."""
    code = """
import time, numpy as np
from prandtl.grid import GridSpec
from prandtl.shear import builtin_profile
from prandtl.solver import make_state, step_imex
from prandtl import KERNEL_BACKEND
g = GridSpec.make(Nx=32, Ny=256, Ymax=12.0)
prof = builtin_profile(3.0, m=2)
w0 = np.outer(np.sin(g.x), g.y * np.exp(-g.y)) * 1e-3
st = make_state(g, prof, 1e-3, 0.0, w0)
for _ in range(20):
    st = step_imex(st, 1e-4)
t0 = time.perf_counter()
for _ in range(300):
    st = step_imex(st, 1e-4)
print(KERNEL_BACKEND, (time.perf_counter() - t0) / 300)
"""
    env = dict(os.environ)
    if force_numpy:
        env["PRANDTL_FORCE_NUMPY_KERNELS"] = "1"
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    backend, secs = out.stdout.split()
    return backend, float(secs)


def main():
    print(f"active backend: {_kernels.BACKEND}")
    print(f"{'kernel':<9} {'size':<14} {'numpy':>10} {'cython':>10} {'speedup':>8}")
    for name, size, t_np, t_cy in bench_ops():
        sp = t_np / t_cy if t_cy == t_cy else float("nan")
        print(f"{name:<9} {size:<14} {t_np * 1e6:>8.1f}us {t_cy * 1e6:>8.1f}us {sp:>7.1f}x")
    print()
    for force in (False, True):
        backend, secs = bench_step(force)
        print(f"full IMEX step (32x256), backend={backend}: {secs * 1e3:.2f} ms")


if __name__ == "__main__":
    main()
