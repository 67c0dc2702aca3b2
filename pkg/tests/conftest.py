import numpy as np
import pytest

from prandtl.grid import GridSpec
from prandtl.norms import SobolevParams
from prandtl.shear import builtin_profile

VERDICT_LINES = []


def pytest_terminal_summary(terminalreporter):
    if VERDICT_LINES:
        terminalreporter.section("acceptance criteria")
        for line in VERDICT_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def grid():
    return GridSpec.make(Nx=32, Ny=128, Ymax=12.0)


@pytest.fixture(scope="session")
def fine_grid():
    return GridSpec.make(Nx=32, Ny=256, Ymax=12.0)


@pytest.fixture(scope="session")
def profile_k3():
    return builtin_profile(3.0, m=2)


@pytest.fixture(scope="session")
def params():
    return SobolevParams(m=2, k=3.0, ell=0.4, ell_prime=0.7, delta=0.1)


@pytest.fixture()
def rng():
    return np.random.default_rng(7)
