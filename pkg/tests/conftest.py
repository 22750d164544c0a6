import numpy as np
import pytest

from torsionlab import BoundaryCurve, InteriorGrid, solve_torsion
from torsionlab.identities import Context

ELLIPSE_A, ELLIPSE_B = 2.0, 1.0
ELLIPSE_SCALE = ELLIPSE_A**2 * ELLIPSE_B**2 / (ELLIPSE_A**2 + ELLIPSE_B**2)   # 0.8

# fixed interior test set for the ellipse: 20 points on rays at fractions of the boundary
_t = np.linspace(0.0, 2.0 * np.pi, 20, endpoint=False) + 0.1
_s = np.linspace(0.05, 0.95, 20)
ELLIPSE_TEST_POINTS = _s * (ELLIPSE_A * np.cos(_t) + 1j * ELLIPSE_B * np.sin(_t))


def ellipse_u(x, a=ELLIPSE_A, b=ELLIPSE_B):
    c = a**2 * b**2 / (a**2 + b**2)
    return c * (x.real**2 / a**2 + x.imag**2 / b**2 - 1.0)


def ellipse_grad(x, a=ELLIPSE_A, b=ELLIPSE_B):
    c = a**2 * b**2 / (a**2 + b**2)
    return 2 * c * x.real / a**2 + 1j * 2 * c * x.imag / b**2


@pytest.fixture(scope="session")
def disk():
    return BoundaryCurve.unit_disk()


@pytest.fixture(scope="session")
def ellipse():
    return BoundaryCurve.ellipse(ELLIPSE_A, ELLIPSE_B)


@pytest.fixture(scope="session")
def bumpy():
    """Convex three-fold perturbed disk."""
    return BoundaryCurve.fourier_disk(1.0, [(3, 0.1)])


@pytest.fixture(scope="session")
def starfish():
    """Nonconvex three-fold perturbed disk."""
    return BoundaryCurve.fourier_disk(1.0, [(3, 0.3)])


@pytest.fixture(scope="session")
def disk_sol(disk):
    return solve_torsion(disk, 64)


@pytest.fixture(scope="session")
def ellipse_sol(ellipse):
    return solve_torsion(ellipse, 256)


@pytest.fixture(scope="session")
def bumpy_sol(bumpy):
    return solve_torsion(bumpy, 256)


@pytest.fixture(scope="session")
def starfish_sol(starfish):
    return solve_torsion(starfish, 256)


@pytest.fixture(scope="session")
def disk_ctx(disk, disk_sol):
    return Context(disk_sol, InteriorGrid(disk, 96, 64))


@pytest.fixture(scope="session")
def ellipse_ctx(ellipse, ellipse_sol):
    return Context(ellipse_sol, InteriorGrid(ellipse, 96, 64))


@pytest.fixture(scope="session")
def bumpy_ctx(bumpy, bumpy_sol):
    return Context(bumpy_sol, InteriorGrid(bumpy, 96, 64))


@pytest.fixture(scope="session")
def starfish_ctx(starfish, starfish_sol):
    return Context(starfish_sol, InteriorGrid(starfish, 96, 64))


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
