import numpy as np
import pytest

from quasibvp.errors import ConfigurationError, EvaluationError
from quasibvp.grid import GridMapSpec, MapKind, build_grid, scheme_coefficients
from quasibvp.problems import colloid_exact, colloid_system, linear_exact, linear_fixture
from quasibvp.scheme import (
    BcStructure,
    BvpSystem,
    DiscreteSolution,
    fd_jacobian_f,
    jacobian,
    legacy_coefficients,
    legacy_midpoint_weights,
    midpoint_weights,
    residual,
)


def numeric_jacobian(sys, grid, coeffs, U, h=1e-7):
    U = np.asarray(U, dtype=float).ravel()
    base = residual(sys, grid, coeffs, U)
    dense = np.empty((base.size, U.size))
    for j in range(U.size):
        shifted = U.copy()
        shifted[j] += h
        dense[:, j] = (residual(sys, grid, coeffs, shifted) - base) / h
    return dense


def test_residual_layout(small_grid):
    grid, coeffs = small_grid
    sys = colloid_system(1.0)
    U = np.tile([1.0, -1.0], (grid.N + 1, 1))
    R = residual(sys, grid, coeffs, U)
    assert R.shape == (2 * (grid.N + 1),)
    # boundary block last: (U1_0 - u0, U1_N)
    np.testing.assert_allclose(R[-2:], [0.0, 1.0])


def test_residual_is_small_at_exact_solution(alg_map):
    residuals = []
    for N in (40, 80):
        grid = build_grid(alg_map, N)
        exact = colloid_exact(1.0, grid.nodes)
        R = residual(colloid_system(1.0), grid, scheme_coefficients(grid), exact)
        residuals.append(np.max(np.abs(R)))
    assert residuals[0] < 0.1
    # local truncation error of a second-order scheme shrinks about eightfold
    assert residuals[1] < residuals[0] / 4


def test_jacobian_matches_finite_differences(small_grid, rng):
    grid, coeffs = small_grid
    sys = colloid_system(2.0)
    U = rng.uniform(-1.0, 1.0, size=(grid.N + 1, 2))
    J = jacobian(sys, grid, coeffs, U)
    np.testing.assert_allclose(J.to_dense(), numeric_jacobian(sys, grid, coeffs, U), rtol=1e-6, atol=1e-6)


def test_jacobian_without_analytic_derivatives(small_grid, rng):
    grid, coeffs = small_grid
    analytic = colloid_system(1.0)
    numeric = analytic.model_copy(update={"f_jac": None, "g_jac": None})
    U = rng.uniform(-1.0, 1.0, size=(grid.N + 1, 2))
    np.testing.assert_allclose(
        jacobian(numeric, grid, coeffs, U).to_dense(), jacobian(analytic, grid, coeffs, U).to_dense(),
        rtol=1e-6, atol=1e-7,
    )


def test_matvec_matches_dense(small_grid, rng):
    grid, coeffs = small_grid
    J = jacobian(colloid_system(1.0), grid, coeffs, rng.normal(size=(grid.N + 1, 2)))
    v = rng.normal(size=J.size)
    np.testing.assert_allclose(J.matvec(v), J.to_dense() @ v, rtol=1e-13, atol=1e-13)


def test_scalar_and_vectorized_systems_agree(small_grid, rng):
    grid, coeffs = small_grid
    vectorized = colloid_system(1.0)
    scalar = vectorized.model_copy(update={"vectorized": False})
    U = rng.uniform(-1.0, 1.0, size=(grid.N + 1, 2))
    np.testing.assert_array_equal(residual(scalar, grid, coeffs, U), residual(vectorized, grid, coeffs, U))
    np.testing.assert_array_equal(
        jacobian(scalar, grid, coeffs, U).to_dense(), jacobian(vectorized, grid, coeffs, U).to_dense()
    )


def test_fd_jacobian_f():
    sys = colloid_system(1.0)
    u = np.array([0.7, -0.3])
    np.testing.assert_allclose(fd_jacobian_f(sys.f, 1.0, u), sys.f_jac(1.0, u), rtol=1e-6, atol=1e-7)


def test_non_finite_f_reports_the_interval(small_grid):
    grid, coeffs = small_grid

    def f(x, u):
        return np.array([u[1], np.nan if x > 5.0 else u[0]])

    sys = BvpSystem(d=2, f=f, g=lambda a, b: np.array([a[0] - 1.0, b[0]]))
    with pytest.raises(EvaluationError) as info:
        residual(sys, grid, coeffs, np.zeros((grid.N + 1, 2)))
    first_bad = int(np.argmax(grid.midpoints > 5.0))
    assert info.value.node == first_bad


def test_non_finite_g(small_grid):
    grid, coeffs = small_grid
    sys = BvpSystem(d=1, f=lambda x, u: -u, g=lambda a, b: np.array([np.inf]))
    with pytest.raises(EvaluationError) as info:
        residual(sys, grid, coeffs, np.zeros(grid.N + 1))
    assert info.value.node == "boundary"


def test_separated_structure_must_cover_d():
    with pytest.raises(ConfigurationError):
        BvpSystem(d=2, f=lambda x, u: u, g=lambda a, b: a, bc_structure=BcStructure.separated(1, 0))


def test_discrete_solution(alg_map):
    grid = build_grid(alg_map, 4)
    solution = DiscreteSolution(grid=grid, U=np.arange(10.0).reshape(5, 2))
    assert (solution.N, solution.d) == (4, 2)
    np.testing.assert_array_equal(solution.component(2), [1.0, 3.0, 5.0, 7.0, 9.0])
    assert DiscreteSolution(grid=grid, U=np.zeros(5)).d == 1
    with pytest.raises(ConfigurationError):
        DiscreteSolution(grid=grid, U=np.zeros((4, 2)))
    with pytest.raises(ConfigurationError):
        DiscreteSolution(grid=grid, U=np.full((5, 2), np.nan))


@pytest.mark.parametrize(
    "x_left, x_mid, x_right, expected",
    [
        (0.0, 1.0, 4.0, (0.75, 0.25)),
        (2.0, 3.0, 4.0, (0.5, 0.5)),
        (0.0, 1.0, np.inf, (1.0, 0.0)),
    ],
)
def test_midpoint_weights(x_left, x_mid, x_right, expected):
    assert midpoint_weights(x_left, x_mid, x_right) == pytest.approx(expected)


def test_legacy_scheme_drops_the_boundary_value(alg_map):
    grid = build_grid(alg_map, 10)
    legacy, current = legacy_coefficients(grid), scheme_coefficients(grid)
    assert legacy.b[-1] == 0.0 and legacy.c[-1] == 1.0
    assert current.b[-1] > 0.0
    np.testing.assert_array_equal(legacy.a, current.a)
    with pytest.raises(IndexError):
        legacy_midpoint_weights(grid, grid.N)


def test_legacy_midpoint_weights_on_a_unit_map():
    grid = build_grid(GridMapSpec(kind=MapKind.ALGEBRAIC, c=1.0), 2)
    assert legacy_midpoint_weights(grid, 0) == pytest.approx((2.0 / 3.0, 1.0 / 3.0), rel=1e-15)


def test_legacy_residual_ignores_last_node(alg_map):
    grid = build_grid(alg_map, 10)
    coeffs = legacy_coefficients(grid)
    sys = linear_fixture()
    U = linear_exact(grid.nodes)
    moved = U.copy()
    moved[-1, 1] += 1.0
    # the last interior block sees U_N only through the difference U_N - U_{N-1}
    R, R_moved = residual(sys, grid, coeffs, U), residual(sys, grid, coeffs, moved)
    last = slice(2 * (grid.N - 1), 2 * grid.N)
    np.testing.assert_allclose(R_moved[last] - R[last], [0.0, 1.0])


def test_fd_jacobian_of_identity():
    u = np.array([0.5, -2.0, 30.0])
    np.testing.assert_allclose(fd_jacobian_f(lambda x, v: v, 0.0, u), np.eye(3), rtol=1e-7, atol=1e-7)


def test_fd_jacobian_of_constant_is_zero():
    jac = fd_jacobian_f(lambda x, v: np.array([2.0, -3.0]), 1.0, np.array([0.1, 0.2]))
    np.testing.assert_array_equal(jac, np.zeros((2, 2)))


def test_linear_jacobian_does_not_depend_on_the_iterate(small_grid, rng):
    grid, coeffs = small_grid
    sys = linear_fixture()
    first, second = rng.normal(size=(2, grid.N + 1, 2))
    np.testing.assert_array_equal(
        jacobian(sys, grid, coeffs, first).to_dense(), jacobian(sys, grid, coeffs, second).to_dense()
    )


def test_residual_is_affine_for_linear_problems(small_grid, rng):
    grid, coeffs = small_grid
    sys = linear_fixture()
    U, V = rng.normal(size=(2, grid.N + 1, 2))
    R = lambda W: residual(sys, grid, coeffs, W)
    zero = np.zeros_like(U)
    np.testing.assert_allclose(R(U + V) - R(U) - R(V) + R(zero), 0.0, atol=1e-10)
    np.testing.assert_allclose(R(2.0 * U) - R(zero), 2.0 * (R(U) - R(zero)), rtol=1e-12, atol=1e-10)
