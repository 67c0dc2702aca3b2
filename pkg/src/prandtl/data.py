"""Initial perturbation family for the experiments.

The datum is assembled from prescribed wall jets,
    u0(x, y) = sum_j phi_j(x) * T_j(y),
where T_j(y) = y^j / j! times a cutoff whose plateau covers the wall stencils,
so (d/dy)^i u0(x, 0) = phi_i(x) exactly.  Choosing

    phi_0 = phi_2 = 0,
    phi_4 = (a + phi_1) dx phi_1,
    phi_6 = -(b + phi_3) dx phi_1 + 4 (a + phi_1) dx phi_3,

with a = dy u0^s(0) and b = dy^3 u0^s(0) makes the wall compatibility
conditions of the *unregularized* system hold through order 6 identically;
the regularized system then needs the standard corrector.  The default
phi_1 = delta0 sin(2 pi x / Lx) keeps the wall x-derivative nonzero, so the
corrector is genuinely nontrivial.
"""

import math
from dataclasses import dataclass

import numpy as np

from .grid import Field2D, smooth_step, smooth_step_deriv

_PLATEAU = 1.2
_SUPPORT = 2.2


def _cutoff(y):
    return 1.0 - smooth_step((y - _PLATEAU) / (_SUPPORT - _PLATEAU))


def _cutoff_prime(y):
    return -smooth_step_deriv((y - _PLATEAU) / (_SUPPORT - _PLATEAU)) / (_SUPPORT - _PLATEAU)


def _dx1(grid, row, n=1):
    F = np.fft.rfft(row)
    F *= (1j * grid.wavenumbers()) ** n
    if n % 2 and grid.Nx % 2 == 0:
        F[-1] = 0.0
    return np.fft.irfft(F, n=grid.Nx)


@dataclass
class InitialData:
    """Perturbation datum with its exact vorticity w = dy u."""

    u: Field2D
    w: Field2D
    jets: dict  # wall jet order -> (Nx,) array


def compatible_perturbation(grid, shear, delta0, mode=1, phi3_amp=0.0):
    """Datum satisfying the unregularized wall conditions through order 6."""
    theta = 2.0 * np.pi * mode / grid.Lx * grid.x
    phi1 = delta0 * np.sin(theta)
    phi3 = phi3_amp * np.sin(theta)
    a = float(shear.eval(0.0, 1))
    b = float(shear.eval(0.0, 3))
    phi4 = (a + phi1) * _dx1(grid, phi1)
    phi6 = -(b + phi3) * _dx1(grid, phi1) + 4.0 * (a + phi1) * _dx1(grid, phi3)
    jets = {1: phi1, 3: phi3, 4: phi4, 6: phi6}
    y = grid.y
    cut, cutp = _cutoff(y), _cutoff_prime(y)
    u = np.zeros((grid.Nx, grid.Ny))
    w = np.zeros((grid.Nx, grid.Ny))
    for j, phi in jets.items():
        tj = y**j / math.factorial(j)
        tjp = y ** (j - 1) / math.factorial(j - 1)
        u += np.outer(phi, tj * cut)
        w += np.outer(phi, tjp * cut + tj * cutp)
    return InitialData(Field2D(grid, u), Field2D(grid, w), jets)


def normalized_perturbation(grid, shear, delta0, params, mode=1, tol=1e-10):
    """Compatible datum rebuilt so that ||w0||_{H^m_{k+ell}} equals delta0.

    The wall conditions are nonlinear in the amplitude, so the family is
    re-manufactured at each trial amplitude rather than rescaled.
    """
    from .norms import norm_Hm

    def build(a):
        return compatible_perturbation(grid, shear, a, mode)

    lam = params.k + params.ell
    a = delta0
    for _ in range(60):
        d = build(a)
        n = norm_Hm(d.w, params.m, lam)
        if abs(n - delta0) <= tol * delta0:
            return d
        a *= delta0 / n
    return build(a)


def incompatible_perturbation(grid, delta0, mode=1):
    """Datum passing orders 0 and 2 but violating the order-4 condition."""
    theta = 2.0 * np.pi * mode / grid.Lx * grid.x
    phi4 = delta0 * np.sin(theta)
    y = grid.y
    cut, cutp = _cutoff(y), _cutoff_prime(y)
    t4 = y**4 / 24.0
    t4p = y**3 / 6.0
    u = np.outer(phi4, t4 * cut)
    w = np.outer(phi4, t4p * cut + t4 * cutp)
    return InitialData(Field2D(grid, u), Field2D(grid, w), {4: phi4})
