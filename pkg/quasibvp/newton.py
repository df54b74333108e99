"""
Newton relaxation for the discrete boundary value problem and mesh continuation.

The Newton matrix is block bidiagonal plus one boundary block row. With
separated boundary conditions the rows are permuted (left conditions, interior
blocks, right conditions) so the matrix is banded and LAPACK's band LU applies.
Coupled conditions put a dense d-column border on the band; it is carried
through the band elimination and the trailing d x d Schur complement is
factored densely.
"""
import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from pydantic import Field, model_validator

from .base import FrozenModel
from .errors import (
    ConfigurationError,
    ContinuationError,
    DivergenceError,
    EvaluationError,
    SingularJacobianError,
)
from .grid import GridMapSpec, QuasiUniformGrid, SchemeCoefficients, build_grid, scheme_coefficients
from .scheme import BlockJacobian, BvpSystem, DiscreteSolution, jacobian, residual

logger = logging.getLogger(__name__)

PIVOT_THRESHOLD = 1e3 * np.finfo(float).eps

FirstGuess = Callable[[QuasiUniformGrid], DiscreteSolution]


class NewtonConfig(FrozenModel):
    """
    :param tol: bound on the mean absolute update that stops the iteration. example: 1e-12
    :param max_iter: iteration cap. example: 50
    :param damping: fixed step factor in (0, 1]; 1 is the classical Newton method
    """

    tol: float = Field(1e-12, gt=0)
    max_iter: int = Field(50, ge=1)
    damping: float = Field(1.0, gt=0, le=1)


class NewtonReport(FrozenModel):
    N: int
    iterations: int = Field(ge=0)
    final_update_norm: float = Field(ge=0)
    converged: bool
    tol: float
    update_norms: Tuple[float, ...] = ()

    @model_validator(mode="after")
    def _converged_within_tol(self):
        if self.converged and self.final_update_norm > self.tol:
            raise ValueError("a converged report must end below the tolerance")
        return self


class ParameterRamp(FrozenModel):
    """
    Parameter continuation used when the coarsest grid does not converge.

    ``family(value)`` builds the system for one parameter value; ``values`` ends
    at the target value and ``first_guess`` seeds the first of them.
    """

    family: Callable
    values: Tuple[float, ...]
    first_guess: Callable


class ContinuationRun(FrozenModel):
    grid_sizes: Tuple[int, ...] = ()
    solutions: Tuple[DiscreteSolution, ...] = ()
    reports: Tuple[NewtonReport, ...] = ()
    path: str = "mesh"
    parameter_reports: Tuple[NewtonReport, ...] = ()
    failed_n: Optional[int] = None
    failure: Optional[str] = None
    failed_report: Optional[NewtonReport] = None

    @model_validator(mode="after")
    def _check_doubling(self):
        sizes = self.grid_sizes
        if any(fine != 2 * coarse for coarse, fine in zip(sizes, sizes[1:])):
            raise ValueError(f"grid sizes must double, got {sizes}")
        if not len(sizes) == len(self.solutions) == len(self.reports):
            raise ValueError("one solution and one report per grid")
        return self

    @property
    def converged(self) -> bool:
        return self.failed_n is None

    def solution(self, N: int) -> DiscreteSolution:
        return self.solutions[self.grid_sizes.index(N)]


def check_doubling(n_list: Sequence[int]) -> List[int]:
    sizes = [int(n) for n in n_list]
    if not sizes or any(n < 1 for n in sizes):
        raise ConfigurationError(f"grid sizes must be positive, got {list(n_list)}")
    if any(fine != 2 * coarse for coarse, fine in zip(sizes, sizes[1:])):
        raise ConfigurationError(f"grid sizes must double from one grid to the next, got {sizes}")
    return sizes


def update_norm(delta_U: np.ndarray) -> float:
    """Mean absolute update (1 / (d (N + 1))) sum |Delta U|, the termination measure."""
    delta = np.asarray(delta_U, dtype=float)
    if delta.size == 0:
        return 0.0
    return float(np.mean(np.abs(delta)))


def _equilibrate(rows: np.ndarray, vals: np.ndarray, size: int) -> np.ndarray:
    scale = np.zeros(size)
    np.maximum.at(scale, rows, np.abs(vals))
    if np.any(scale == 0.0):
        raise SingularJacobianError("Newton matrix has a zero row", pivot_index=int(np.argmin(scale)))
    return scale


def _separated_entries(J: BlockJacobian) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Coordinates of the banded ordering: left conditions, interior blocks, right conditions."""
    N, d = J.N, J.d
    n_left = J.bc_structure.n_left
    if np.any(J.g0[n_left:] != 0.0) or np.any(J.gN[:n_left] != 0.0):
        raise ConfigurationError("boundary function does not match its separated structure")
    n, i, j = np.meshgrid(np.arange(N), np.arange(d), np.arange(d), indexing="ij")
    interior_rows = n_left + n * d + i
    left_i, left_j = np.meshgrid(np.arange(n_left), np.arange(d), indexing="ij")
    right_i, right_j = np.meshgrid(np.arange(n_left, d), np.arange(d), indexing="ij")
    rows = np.concatenate([
        left_i.ravel(), interior_rows.ravel(), interior_rows.ravel(), (N * d + right_i).ravel(),
    ])
    cols = np.concatenate([
        left_j.ravel(), (n * d + j).ravel(), ((n + 1) * d + j).ravel(), (N * d + right_j).ravel(),
    ])
    vals = np.concatenate([
        J.g0[:n_left].ravel(), J.lower.ravel(), J.upper.ravel(), J.gN[n_left:].ravel(),
    ])
    # banded row r holds residual entry perm[r]
    perm = np.concatenate([N * d + np.arange(n_left), np.arange(N * d), N * d + np.arange(n_left, d)])
    return rows, cols, vals, perm


def _solve_separated(J: BlockJacobian, rhs: np.ndarray) -> np.ndarray:
    d, size = J.d, J.size
    n_left = J.bc_structure.n_left
    kl, ku = n_left + d - 1, 2 * d - 1 - n_left
    rows, cols, vals, perm = _separated_entries(J)
    scale = _equilibrate(rows, vals, size)
    ab = np.zeros((2 * kl + ku + 1, size))
    # LAPACK band storage: A[r, c] lives at ab[kl + ku + r - c, c]
    np.add.at(ab, (kl + ku + rows - cols, cols), vals / scale[rows])
    gbtrf, gbtrs = scipy.linalg.get_lapack_funcs(("gbtrf", "gbtrs"), (ab,))
    lu, piv, info = gbtrf(ab, kl, ku)
    if info > 0:
        raise SingularJacobianError("exact zero pivot in banded LU", pivot_index=int(info - 1))
    pivots = np.abs(lu[kl + ku])
    if np.any(pivots < PIVOT_THRESHOLD):
        raise SingularJacobianError("numerically singular banded LU", pivot_index=int(np.argmin(pivots)))
    x, info = gbtrs(lu, kl, ku, rhs[perm] / scale, piv)
    if info != 0:
        raise SingularJacobianError("banded back substitution failed", pivot_index=int(abs(info)))
    return x


def _solve_coupled(J: BlockJacobian, rhs: np.ndarray) -> np.ndarray:
    """Band elimination with partial pivoting carrying the U_N border columns."""
    N, d, size = J.N, J.d, J.size
    m = N * d
    kl, ku = 2 * d - 1, d - 1
    fill = kl + ku
    # rows: boundary block first, then interior blocks
    dense_rows = np.concatenate([m + np.arange(d), np.arange(m)])
    n, i, j = np.meshgrid(np.arange(N), np.arange(d), np.arange(d), indexing="ij")
    bi, bj = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    rows = np.concatenate([bi.ravel(), bi.ravel(), (d + n * d + i).ravel(), (d + n * d + i).ravel()])
    cols = np.concatenate([bj.ravel(), m + bj.ravel(), (n * d + j).ravel(), ((n + 1) * d + j).ravel()])
    vals = np.concatenate([J.g0.ravel(), J.gN.ravel(), J.lower.ravel(), J.upper.ravel()])
    scale = _equilibrate(rows, vals, size)
    vals = vals / scale[rows]
    b = rhs[dense_rows] / scale

    # band part: A[r, c] at band[fill + r - c, c] for c < m; border: A[r, m + k] at border[r, k]
    band = np.zeros((fill + kl + 1, m))
    border = np.zeros((size, d))
    in_band = cols < m
    np.add.at(band, (fill + rows[in_band] - cols[in_band], cols[in_band]), vals[in_band])
    np.add.at(border, (rows[~in_band], cols[~in_band] - m), vals[~in_band])

    for c in range(m):
        below = np.arange(c, min(c + kl, size - 1) + 1)
        span = np.arange(c, min(c + fill, m - 1) + 1)
        candidates = band[fill + below - c, c]
        p = below[int(np.argmax(np.abs(candidates)))]
        if abs(band[fill + p - c, c]) < PIVOT_THRESHOLD:
            raise SingularJacobianError("numerically singular bordered elimination", pivot_index=c)
        if p != c:
            row_c, row_p = band[fill + c - span, span].copy(), band[fill + p - span, span].copy()
            band[fill + c - span, span], band[fill + p - span, span] = row_p, row_c
            border[[c, p]] = border[[p, c]]
            b[[c, p]] = b[[p, c]]
        rest = below[1:]
        if rest.size == 0:
            continue
        factors = band[fill + rest - c, c] / band[fill, c]
        right = span[1:]
        if right.size:
            band[fill + rest[:, None] - right[None, :], right[None, :]] -= (
                factors[:, None] * band[fill + c - right, right][None, :]
            )
        band[fill + rest - c, c] = 0.0
        border[rest] -= factors[:, None] * border[c]
        b[rest] -= factors * b[c]

    schur = border[m:]
    lu, piv = scipy.linalg.lu_factor(schur, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if np.any(pivots < PIVOT_THRESHOLD):
        raise SingularJacobianError("numerically singular Schur complement", pivot_index=m + int(np.argmin(pivots)))
    x = np.empty(size)
    x[m:] = scipy.linalg.lu_solve((lu, piv), b[m:], check_finite=False)
    for c in range(m - 1, -1, -1):
        right = np.arange(c + 1, min(c + fill, m - 1) + 1)
        acc = b[c] - border[c] @ x[m:] - band[fill + c - right, right] @ x[right]
        x[c] = acc / band[fill, c]
    return x


def solve_linear(J: BlockJacobian, rhs: np.ndarray) -> np.ndarray:
    """
    Solve J x = rhs for the structured Newton matrix.

    :param J: block Jacobian from ``scheme.jacobian``
    :param rhs: right-hand side in residual ordering, length d (N + 1)
    :return: the solution in unknown ordering (U_0, ..., U_N flattened)
    """
    rhs = np.asarray(rhs, dtype=float).ravel()
    if rhs.shape != (J.size,):
        raise ConfigurationError(f"right-hand side has length {rhs.size}, expected {J.size}")
    if J.bc_structure.is_separated:
        return _solve_separated(J, rhs)
    return _solve_coupled(J, rhs)


def newton_solve(
    sys: BvpSystem,
    grid: QuasiUniformGrid,
    U_init: DiscreteSolution,
    cfg: NewtonConfig = NewtonConfig(),
    coeffs: Optional[SchemeCoefficients] = None,
) -> Tuple[DiscreteSolution, NewtonReport]:
    """
    Newton's method on the discrete system until the mean absolute update drops below ``cfg.tol``.

    :return: the accepted (or, without convergence, the lowest-residual) iterate and its report
    """
    coeffs = coeffs if coeffs is not None else scheme_coefficients(grid)
    U = np.array(U_init.U, dtype=float)
    if U.shape != (grid.N + 1, sys.d):
        raise ConfigurationError(f"first iterate has shape {U.shape}, expected {(grid.N + 1, sys.d)}")
    best_U, best_residual = U.copy(), np.inf
    norms: List[float] = []
    for iteration in range(1, cfg.max_iter + 1):
        R = residual(sys, grid, coeffs, U)
        residual_norm = float(np.max(np.abs(R)))
        if residual_norm < best_residual:
            best_U, best_residual = U.copy(), residual_norm
        step = cfg.damping * solve_linear(jacobian(sys, grid, coeffs, U), R)
        U = U - step.reshape(U.shape)
        if not np.all(np.isfinite(U)):
            raise DivergenceError(f"Newton iterate on N={grid.N} became non-finite", iteration=iteration)
        norms.append(update_norm(step))
        logger.debug(f"[newton_solve] N={grid.N} iteration {iteration} update_norm={norms[-1]:.3e}")
        if norms[-1] <= cfg.tol:
            report = NewtonReport(
                N=grid.N, iterations=iteration, final_update_norm=norms[-1], converged=True,
                tol=cfg.tol, update_norms=tuple(norms),
            )
            logger.info(f"[newton_solve] N={grid.N} converged in {iteration} iterations")
            return DiscreteSolution(grid=grid, U=U), report

    try:
        if float(np.max(np.abs(residual(sys, grid, coeffs, U)))) < best_residual:
            best_U = U
    except EvaluationError:
        pass
    logger.warning(f"[newton_solve] N={grid.N} did not converge in {cfg.max_iter} iterations")
    report = NewtonReport(
        N=grid.N, iterations=cfg.max_iter, final_update_norm=norms[-1], converged=False,
        tol=cfg.tol, update_norms=tuple(norms),
    )
    return DiscreteSolution(grid=grid, U=best_U), report


def interpolate_to_finer(coarse: DiscreteSolution) -> DiscreteSolution:
    """
    First iterate on the grid with 2N intervals.

    Even nodes copy the coarse values and odd nodes take the mean of their two
    neighbours, i.e. linear interpolation in xi where the grid is uniform; the
    last odd node, between x_{N-1} and x_N = inf, is treated the same way.
    """
    U = coarse.U
    fine = np.empty((2 * coarse.N + 1, coarse.d))
    fine[0::2] = U
    fine[1::2] = 0.5 * (U[:-1] + U[1:])
    return DiscreteSolution(grid=build_grid(coarse.grid.map, 2 * coarse.N), U=fine)


def parameter_continuation(
    family: Callable[[float], BvpSystem],
    values: Sequence[float],
    grid: QuasiUniformGrid,
    U_init: DiscreteSolution,
    cfg: NewtonConfig = NewtonConfig(),
) -> Tuple[DiscreteSolution, List[NewtonReport]]:
    """
    Solve ``family(v)`` for each v in ``values`` on one grid, each solve warm-starting the next.

    Stops at the first value that does not converge; its report is the last one returned.
    """
    solution, reports = U_init, []
    for value in values:
        solution, report = newton_solve(family(value), grid, solution, cfg)
        reports.append(report)
        logger.info(f"[parameter_continuation] value={value} N={grid.N} iterations={report.iterations}")
        if not report.converged:
            break
    return solution, reports


def continuation_solve(
    sys: BvpSystem,
    spec: GridMapSpec,
    N_list: Sequence[int],
    first_guess: FirstGuess,
    cfg: NewtonConfig = NewtonConfig(),
    ramp: Optional[ParameterRamp] = None,
) -> ContinuationRun:
    """
    Solve on a doubling sequence of grids, warm-starting each grid from the previous one.

    The coarsest grid starts from ``first_guess``; when it fails and ``ramp`` is
    given, parameter continuation on the coarsest grid supplies its solution.
    A grid that does not converge ends the sequence: the run keeps the
    completed prefix and records the failing N.
    """
    sizes = check_doubling(N_list)
    done = {"grid_sizes": [], "solutions": [], "reports": []}
    path, parameter_reports = "mesh", []

    def partial(**extra) -> ContinuationRun:
        return ContinuationRun(
            grid_sizes=tuple(done["grid_sizes"]), solutions=tuple(done["solutions"]),
            reports=tuple(done["reports"]), path=path, parameter_reports=tuple(parameter_reports), **extra,
        )

    for position, N in enumerate(sizes):
        grid = build_grid(spec, N)
        guess = first_guess(grid) if position == 0 else interpolate_to_finer(done["solutions"][-1])
        try:
            solution, report = newton_solve(sys, grid, guess, cfg)
        except (SingularJacobianError, DivergenceError, EvaluationError) as e:
            if position > 0 or ramp is None:
                raise ContinuationError(str(e), n=N, run=partial()) from e
            logger.warning(f"[continuation_solve] N={N} failed from the first iterate: {e}")
            solution, report = None, None
        if position == 0 and (report is None or not report.converged) and ramp is not None:
            path = "parameter+mesh"
            logger.info(f"[continuation_solve] switching to parameter continuation over {list(ramp.values)}")
            try:
                solution, reports = parameter_continuation(ramp.family, ramp.values, grid, ramp.first_guess(grid), cfg)
            except (SingularJacobianError, DivergenceError, EvaluationError) as e:
                raise ContinuationError(str(e), n=N, run=partial()) from e
            parameter_reports, report = reports[:-1], reports[-1]
        if not report.converged:
            logger.warning(f"[continuation_solve] stopping: N={N} did not converge")
            return partial(failed_n=N, failure=f"no convergence in {report.iterations} iterations",
                           failed_report=report)
        done["grid_sizes"].append(N)
        done["solutions"].append(solution)
        done["reports"].append(report)
    logger.info(f"[continuation_solve] path={path} grids={sizes}")
    return partial()
