import numpy as np
import pytest

from quasibvp.grid import GridMapSpec, MapKind, build_grid, scheme_coefficients
from quasibvp.newton import NewtonConfig, continuation_solve
from quasibvp.problems import ColloidProblem, LinearProblem

# Richardson table of du/dx(0) for the colloid problem with u0 = 7, grids 160 .. 5120
TABLE_SIZES = (160, 320, 640, 1280, 2560, 5120)
TABLE_RAW = (
    -43.835177171609345,
    -45.864298511341850,
    -46.537797149336093,
    -46.725033491934731,
    -46.773360098843838,
    -46.785544794016836,
)
TABLE_LEVEL1 = (
    -46.540672291252690,
    -46.762296695334179,
    -46.787445606134277,
    -46.789468967813541,
    -46.789606359074504,
)
TABLE_LEVEL2 = (
    -46.777071655606278,
    -46.789122200187620,
    -46.789603858592159,
    -46.789615518491907,
)
DUDX0_U0_7 = -46.789615734913319


@pytest.fixture
def alg_map():
    return GridMapSpec(kind=MapKind.ALGEBRAIC, c=10.0)


@pytest.fixture
def log_map():
    return GridMapSpec(kind=MapKind.LOGARITHMIC, c=10.0)


@pytest.fixture(params=[MapKind.LOGARITHMIC, MapKind.ALGEBRAIC], ids=["log", "alg"])
def any_map(request):
    return GridMapSpec(kind=request.param, c=10.0)


@pytest.fixture
def small_grid(alg_map):
    grid = build_grid(alg_map, 8)
    return grid, scheme_coefficients(grid)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def colloid_run():
    """Colloid problem, u0 = 1, on N = 5 .. 160 with the default map."""
    problem = ColloidProblem(u0=1.0)
    return continuation_solve(
        problem.system(), GridMapSpec(), [5, 10, 20, 40, 80, 160], problem.first_guess, NewtonConfig()
    )


@pytest.fixture(scope="session")
def linear_run():
    problem = LinearProblem()
    return continuation_solve(problem.system(), GridMapSpec(), [20, 40, 80, 160, 320], problem.first_guess)
