import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prandtl.errors import GridMismatchError, InvalidTailError, ResolutionError, UnsupportedOrderError
from prandtl.grid import (
    Field2D,
    GridSpec,
    dx,
    dy,
    integrate_y_from_0,
    integrate_y_to_inf,
    weight_profile,
)

from oracles import central_difference_x


def test_quadrature_of_one_is_exact(grid):
    assert abs(grid.quad_weights.sum() - grid.Ymax) <= 1e-12 * grid.Ymax


def test_stretch_endpoints_and_monotonicity(grid):
    assert grid.y[0] == 0.0
    assert grid.y[-1] == grid.Ymax
    assert np.all(np.diff(grid.y) > 0)


def test_field_shape_and_finite_validation(grid):
    with pytest.raises(ValueError):
        grid.field(np.zeros((3, 3)))
    bad = np.zeros((grid.Nx, grid.Ny))
    bad[0, 0] = np.inf
    with pytest.raises(ValueError):
        grid.field(bad)


def test_field_grid_mismatch(grid):
    other = GridSpec.make(Nx=32, Ny=96, Ymax=12.0)
    with pytest.raises(GridMismatchError):
        _ = grid.zeros() + other.zeros()


# -- dx -----------------------------------------------------------------------


def test_dx_single_mode_exact(grid):
    f = grid.from_function(lambda X, Y: np.sin(2 * np.pi * X / grid.Lx))
    expect = grid.from_function(
        lambda X, Y: (2 * np.pi / grid.Lx) * np.cos(2 * np.pi * X / grid.Lx))
    assert np.max(np.abs(dx(f, 1).values - expect.values)) < 1e-12


def test_dx_constant_is_zero(grid):
    f = grid.field(np.ones((grid.Nx, grid.Ny)))
    assert np.max(np.abs(dx(f, 3).values)) == 0.0


def test_dx_matches_second_difference_under_refinement():
    rng = np.random.default_rng(3)
    coeffs = rng.normal(size=4)
    errs = []
    for Nx in (32, 64):
        g = GridSpec.make(Nx=Nx, Ny=16, Ymax=4.0)
        X, _ = np.meshgrid(g.x, g.y, indexing="ij")
        vals = sum(c * np.cos((q + 1) * X) for q, c in enumerate(coeffs))
        f = g.field(vals)
        stencil = central_difference_x(vals, g.wx, order=2)
        errs.append(np.max(np.abs(dx(f, 2).values - stencil)))
    # the mismatch is the stencil's O(h^2) truncation, so it must drop ~4x
    assert errs[0] / errs[1] > 3.0


def test_dx_resolution_error(grid):
    with pytest.raises(ResolutionError):
        dx(grid.zeros(), grid.Nx // 4 + 1)


# -- dy -----------------------------------------------------------------------


def test_dy_quadratic_exact():
    g = GridSpec.make(Nx=8, Ny=256, Ymax=12.0)
    f = g.from_profile(lambda y: y**2)
    err = np.abs(dy(f, 1).values - 2.0 * g.y)
    assert err.max() <= 1e-8


def test_dy_constant_zero(grid):
    f = grid.field(np.ones((grid.Nx, grid.Ny)))
    assert np.max(np.abs(dy(f, 1).values)) < 1e-12


def test_dy_exp_second_derivative_interior_order():
    errs = []
    for Ny in (65, 129):
        g = GridSpec.make(Nx=8, Ny=Ny, Ymax=8.0)
        f = g.from_profile(lambda y: np.exp(-y))
        interior = slice(6, -6)
        err = np.abs(dy(f, 2).values[:, interior] - np.exp(-g.y)[interior])
        errs.append(err.max())
    assert errs[0] / errs[1] >= 8.0  # >= O(h^3) observed; nominal order 4-5


def test_dy_unsupported_order(grid):
    with pytest.raises(UnsupportedOrderError):
        dy(grid.zeros(), 9)


def test_dx_dy_commute():
    g = GridSpec.make(Nx=32, Ny=129, Ymax=8.0)
    f = g.from_function(lambda X, Y: np.sin(X) * np.exp(-(Y - 2.0) ** 2))
    a = dy(dx(f, 1), 1).values
    b = dx(dy(f, 1), 1).values
    assert np.max(np.abs(a - b)) < 1e-10  # dx is a Fourier multiplier; exact commutation


# -- integration ---------------------------------------------------------------


def test_integrate_from_0_exponential(fine_grid):
    g = fine_grid
    f = g.from_profile(lambda y: np.exp(-y))
    got = integrate_y_from_0(f).values
    expect = 1.0 - np.exp(-g.y)
    rel = np.abs(got - expect)[:, 1:] / expect[1:]
    assert rel.max() <= 1e-8
    assert np.all(got[:, 0] == 0.0)


def test_integrate_from_0_zero(grid):
    assert np.max(np.abs(integrate_y_from_0(grid.zeros()).values)) == 0.0


def test_integrate_roundtrip_fundamental_theorem(grid, rng):
    # dy then integrate recovers g - g(0) for smooth wall-vanishing fields
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    for _ in range(20):
        amp, beta = rng.normal(), rng.uniform(0.5, 1.5)
        vals = amp * np.sin(X) * Y * np.exp(-beta * Y)
        f = grid.field(vals)
        back = integrate_y_from_0(dy(f, 1)).values
        assert np.max(np.abs(back - vals)) < 1e-6 * max(1.0, abs(amp))


def test_dy_of_cumulative_recovers_integrand(grid, rng):
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    worst = 0.0
    for _ in range(100):
        amp, beta = rng.normal(), rng.uniform(0.4, 1.2)
        q = rng.integers(0, 4)
        vals = amp * np.cos(q * X) * np.exp(-beta * Y) * (1.0 + Y)
        f = grid.field(vals)
        back = dy(integrate_y_from_0(f), 1).values
        worst = max(worst, np.max(np.abs(back - vals)) / max(np.max(np.abs(vals)), 1e-30))
    # bound = 10x the observed quadrature/stencil tolerance at Ny = 128
    assert worst < 5e-5


def test_integrate_to_inf_zero(grid):
    out = integrate_y_to_inf(grid.zeros(), 4.0)
    assert np.max(np.abs(out.values)) == 0.0


def test_integrate_to_inf_algebraic_tail(fine_grid):
    from scipy.integrate import quad

    g = fine_grid
    f = g.from_profile(lambda y: (1.0 + y * y) ** (-2.0))
    got = integrate_y_to_inf(f, 4.0).values[0]
    expect = np.array([quad(lambda s: (1 + s * s) ** -2.0, yj, np.inf)[0] for yj in g.y])
    rel = np.abs(got - expect) / expect[0]
    assert rel.max() <= 1e-4


def test_integrate_to_inf_exponential_tail_error(fine_grid):
    g = fine_grid
    f = g.from_profile(lambda y: np.exp(-y))
    got = integrate_y_to_inf(f, 4.0).values[0]
    err = np.abs(got - np.exp(-g.y))
    assert err.max() <= 10.0 * np.exp(-g.Ymax) * g.Ymax


def test_integrate_to_inf_monotone_for_positive(fine_grid):
    g = fine_grid
    f = g.from_profile(lambda y: np.exp(-0.5 * y))
    vals = integrate_y_to_inf(f, 4.0).values[0]
    assert np.all(np.diff(vals) <= 1e-14)


def test_integrate_to_inf_invalid_tail(grid):
    with pytest.raises(InvalidTailError):
        integrate_y_to_inf(grid.zeros(), 1.0)


# -- weights -------------------------------------------------------------------


def test_weight_profile_zero_lambda(grid):
    assert np.max(np.abs(weight_profile(0.0, grid).values - 1.0)) == 0.0


def test_weight_profile_values(grid):
    w = weight_profile(2.0, grid)
    j = np.argmin(np.abs(grid.y - 1.0))
    assert w.values[0, 0] == 1.0  # <0>^lam = 1 for any lam at y = 0
    assert abs(w.values[0, j] - (1.0 + grid.y[j] ** 2)) < 1e-14


@given(lam=st.floats(-4.0, 4.0))
@settings(max_examples=25, deadline=None)
def test_weight_profile_product_identity(lam):
    g = GridSpec.make(Nx=8, Ny=32, Ymax=6.0)
    prod = weight_profile(lam, g).values * weight_profile(-lam, g).values
    assert np.max(np.abs(prod - 1.0)) < 1e-12


def test_peetre_inequality_pointwise():
    # <ytilde>^lam >= c0 <y>^lam <y + ytilde>^(-|lam|) for lam = -k, c0 = 2^(-k/2)
    k = 3.0
    c0 = 2.0 ** (-k / 2.0)
    y = np.linspace(0.0, 20.0, 64)
    yt = np.linspace(0.0, 20.0, 64)
    Yg, Tg = np.meshgrid(y, yt, indexing="ij")
    lhs = c0 * (1 + Yg**2) ** (-k / 2) * (1 + (Yg + Tg) ** 2) ** (-k / 2)
    rhs = (1 + Tg**2) ** (-k / 2)
    assert np.all(lhs <= rhs * (1 + 1e-12))
