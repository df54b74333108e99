"""
Richardson extrapolation on nested doubling grids.

All grids of a doubling sequence share the nodes of the coarsest one, so
solutions are compared and combined there. Extrapolation level k removes the
error term of order p_k = p0 + k * order_step.
"""
import logging
from typing import Callable, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import Field, field_validator, model_validator

from .base import FrozenModel, readonly
from .errors import ConfigurationError, UndefinedOrderError
from .scheme import DiscreteSolution

logger = logging.getLogger(__name__)

NormKind = Literal["max", "node"]
ExactSolution = Callable[[float], np.ndarray]

# errors below NOISE_FACTOR * eps * max|u| are round-off and get no observed order
NOISE_FACTOR = 1e3


class ExtrapolationTable(FrozenModel):
    """
    Triangular table U_{g,k}, 0 <= k <= g, of one scalar quantity.

    ``entries[g, k]`` is NaN above the diagonal (k > g).
    """

    quantity_label: str = ""
    grid_sizes: Tuple[int, ...]
    entries: np.ndarray
    orders: Tuple[float, ...]

    @field_validator("entries", mode="before")
    @classmethod
    def _entries_readonly(cls, v):
        return readonly(v, 2)

    @model_validator(mode="after")
    def _check_shape(self):
        rows, cols = self.entries.shape
        if rows != len(self.grid_sizes) or cols != len(self.orders) or cols > rows:
            raise ValueError(f"table of shape {self.entries.shape} does not fit {len(self.grid_sizes)} grids")
        return self

    @property
    def levels(self) -> int:
        return len(self.orders) - 1

    def entry(self, g: int, k: int) -> float:
        if not 0 <= k <= g < len(self.grid_sizes):
            raise IndexError(f"U_{{{g},{k}}} is not part of the table")
        return float(self.entries[g, k])

    def column(self, k: int) -> np.ndarray:
        """Defined entries of level k, i.e. rows g = k .. G."""
        return self.entries[k:, k]


class ErrorEstimate(FrozenModel):
    """
    A posteriori estimate of the error of U_{2N}, given on the nodes of the coarse grid.
    """

    coarse_N: int = Field(ge=1)
    x: np.ndarray
    values: np.ndarray
    order_used: float

    @field_validator("x", mode="before")
    @classmethod
    def _x_readonly(cls, v):
        return readonly(v, 1)

    @field_validator("values", mode="before")
    @classmethod
    def _values_readonly(cls, v):
        return readonly(v, 2)

    @model_validator(mode="after")
    def _on_coarse_nodes(self):
        if self.values.shape[0] != self.coarse_N + 1 or self.x.shape != (self.coarse_N + 1,):
            raise ValueError(f"estimate must have {self.coarse_N + 1} rows")
        return self

    @property
    def max_norm(self) -> np.ndarray:
        return np.max(np.abs(self.values), axis=0)


class OrderEstimate(FrozenModel):
    """
    Errors and observed orders of a grid study.

    ``errors[g, k, i]`` is the error of level-k values on grid g for component
    i (max over the common nodes, or at one node); ``orders[g, k, i]`` the
    observed order of the pair (g, g + 1). Undefined entries are NaN.
    """

    grid_sizes: Tuple[int, ...]
    norm_kind: NormKind = "max"
    node: Optional[int] = None
    reference_n: Optional[int] = None
    true_orders: Tuple[float, ...]
    errors: np.ndarray
    orders: np.ndarray

    @field_validator("errors", "orders", mode="before")
    @classmethod
    def _readonly(cls, v):
        return readonly(v, 3)

    @model_validator(mode="after")
    def _check_shapes(self):
        G1, L1, d = self.errors.shape
        if G1 != len(self.grid_sizes) or L1 != len(self.true_orders) or self.orders.shape != (G1 - 1, L1, d):
            raise ValueError("errors and orders do not match the grid study")
        if self.norm_kind == "node" and self.node is None:
            raise ValueError("node norm needs a node index")
        return self

    def last_defined_orders(self) -> np.ndarray:
        """Per level and component, the observed order of the finest pair where it is defined."""
        _, L1, d = self.errors.shape
        out = np.full((L1, d), np.nan)
        for k in range(L1):
            for i in range(d):
                column = self.orders[:, k, i]
                finite = column[np.isfinite(column)]
                if finite.size:
                    out[k, i] = finite[-1]
        return out


def true_orders(p0: float, order_step: float, levels: int) -> Tuple[float, ...]:
    """p_k = p0 + k * order_step for k = 0 .. levels."""
    if not p0 > 0 or not order_step > 0:
        raise ConfigurationError(f"orders must be positive, got p0={p0}, order_step={order_step}")
    if levels < 0:
        raise ConfigurationError(f"levels must be non-negative, got {levels}")
    return tuple(float(p0 + k * order_step) for k in range(levels + 1))


def extrapolate_step(u_coarse, u_fine, p_k: float):
    """
    One Richardson step for the refinement ratio 2.

    :return: u_fine + (u_fine - u_coarse) / (2**p_k - 1)
    """
    if not p_k > 0:
        raise ConfigurationError(f"order must be positive, got {p_k}")
    return u_fine + (u_fine - u_coarse) / (2.0**p_k - 1.0)


def _fill_levels(raw: np.ndarray, orders: Sequence[float]) -> np.ndarray:
    # raw has the grid index first; the result gets the level index second
    G1 = raw.shape[0]
    table = np.full((G1, len(orders)) + raw.shape[1:], np.nan)
    table[:, 0] = raw
    for k, p_k in enumerate(orders[:-1]):
        table[k + 1:, k + 1] = extrapolate_step(table[k:-1, k], table[k + 1:, k], p_k)
    return table


def build_table(
    raw_values: Sequence[float],
    p0: float = 2.0,
    order_step: float = 2.0,
    levels: int = 2,
    grid_sizes: Optional[Sequence[int]] = None,
    quantity_label: str = "",
) -> ExtrapolationTable:
    """
    Fill the extrapolation table from one value per grid.

    :param raw_values: the quantity on grids N_0, 2 N_0, ... (coarsest first)
    :param levels: number of extrapolations; needs at least levels + 1 grids
    """
    raw = np.asarray(raw_values, dtype=float)
    if raw.ndim != 1:
        raise ConfigurationError("build_table expects one scalar per grid")
    if raw.size < levels + 1:
        raise ConfigurationError(f"{levels} extrapolations need at least {levels + 1} grids, got {raw.size}")
    sizes = tuple(grid_sizes) if grid_sizes is not None else tuple(range(raw.size))
    if len(sizes) != raw.size:
        raise ConfigurationError(f"{raw.size} values for {len(sizes)} grids")
    orders = true_orders(p0, order_step, levels)
    return ExtrapolationTable(
        quantity_label=quantity_label, grid_sizes=sizes, entries=_fill_levels(raw, orders), orders=orders,
    )


def observed_order(err_coarse: float, err_fine: float) -> float:
    """Observed order log2(err_coarse / err_fine) of a doubling pair."""
    if not (err_coarse > 0 and err_fine > 0):
        raise UndefinedOrderError(f"observed order needs positive errors, got {err_coarse} and {err_fine}")
    return float((np.log(err_coarse) - np.log(err_fine)) / np.log(2.0))


def _restrict(solution: DiscreteSolution, N_coarse: int) -> np.ndarray:
    ratio, rest = divmod(solution.N, N_coarse)
    if rest or ratio < 1 or ratio & (ratio - 1):
        raise ConfigurationError(f"grid N={solution.N} is not a doubling refinement of N={N_coarse}")
    return solution.U[::ratio]


def restrict_to_coarse(fine: DiscreteSolution) -> np.ndarray:
    """Rows 0, 2, ..., 2N of a solution on 2N intervals: its values at the nodes of the N grid."""
    if fine.N % 2:
        raise ConfigurationError(f"cannot restrict a grid with odd N={fine.N}")
    return fine.U[::2].copy()


def error_estimate(coarse: DiscreteSolution, fine: DiscreteSolution, p0: float = 2.0) -> ErrorEstimate:
    """
    E = (U_{2N} - U_N) / (2**p0 - 1) on the coarse nodes, an estimate of the error of U_{2N}.
    """
    if not coarse.grid.is_nested_in(fine.grid):
        raise ConfigurationError(
            f"error estimate needs nested grids, got N={coarse.N} ({coarse.grid.map}) "
            f"and N={fine.N} ({fine.grid.map})"
        )
    if coarse.d != fine.d:
        raise ConfigurationError(f"solutions have {coarse.d} and {fine.d} components")
    if not p0 > 0:
        raise ConfigurationError(f"order must be positive, got {p0}")
    values = (restrict_to_coarse(fine) - coarse.U) / (2.0**p0 - 1.0)
    return ErrorEstimate(coarse_N=coarse.N, x=coarse.x, values=values, order_used=p0)


def exact_on_nodes(exact: ExactSolution, x: np.ndarray, d: int) -> np.ndarray:
    """Evaluate ``exact`` node by node, including the limit value at x = inf."""
    values = np.array([np.asarray(exact(float(node)), dtype=float).ravel() for node in x])
    if values.shape != (len(x), d):
        raise ConfigurationError(f"exact solution returned shape {values.shape[1:]}, expected ({d},)")
    return values


def global_error(solution: DiscreteSolution, exact: ExactSolution) -> np.ndarray:
    """e_n = u(x_n) - U_n for every node and component."""
    return exact_on_nodes(exact, solution.x, solution.d) - solution.U


def pointwise_violations(estimate: ErrorEstimate, true_error: np.ndarray) -> np.ndarray:
    """Per component, the number of coarse nodes where |E| < |e|."""
    true_error = np.asarray(true_error, dtype=float)
    if true_error.shape != estimate.values.shape:
        raise ConfigurationError(f"error of shape {true_error.shape} does not match estimate {estimate.values.shape}")
    return np.sum(np.abs(estimate.values) < np.abs(true_error), axis=0)


def _study_sizes(solutions: Sequence[DiscreteSolution]) -> Tuple[int, ...]:
    if not solutions:
        raise ConfigurationError("no solutions given")
    sizes = tuple(s.N for s in solutions)
    if any(fine != 2 * coarse for coarse, fine in zip(sizes, sizes[1:])):
        raise ConfigurationError(f"solutions must be on doubling grids, got {sizes}")
    base = solutions[0].grid.map
    if any(s.grid.map != base for s in solutions):
        raise ConfigurationError("solutions must share one grid map")
    return sizes


def extrapolate_solutions(
    solutions: Sequence[DiscreteSolution], p0: float = 2.0, order_step: float = 2.0, levels: int = 2,
) -> np.ndarray:
    """
    Node-wise extrapolation of whole solutions on the coarsest grid's nodes.

    :return: array U[g, k, n, i] of shape (G + 1, levels + 1, N_0 + 1, d); NaN for k > g
    """
    sizes = _study_sizes(solutions)
    if len(sizes) < levels + 1:
        raise ConfigurationError(f"{levels} extrapolations need at least {levels + 1} grids, got {len(sizes)}")
    raw = np.stack([_restrict(s, sizes[0]) for s in solutions])
    return _fill_levels(raw, true_orders(p0, order_step, levels))


def order_study(
    solutions: Sequence[DiscreteSolution],
    p0: float = 2.0,
    order_step: float = 2.0,
    levels: int = 2,
    exact: Optional[ExactSolution] = None,
    reference: Optional[DiscreteSolution] = None,
    norm: NormKind = "max",
    node: int = 0,
) -> OrderEstimate:
    """
    Errors and observed orders for every grid pair and extrapolation level.

    Errors are measured against ``exact`` or, when no exact solution is known,
    against ``reference``, a solution on a finer grid of the same sequence.
    ``norm="max"`` takes the max over the common nodes, ``norm="node"`` the
    error at coarse node ``node``. Pairs with a zero error, or an error below
    ``NOISE_FACTOR * eps * max|u|`` of that component, have no order and stay NaN.
    """
    if (exact is None) == (reference is None):
        raise ConfigurationError("order study needs exactly one of an exact solution and a reference solution")
    sizes = _study_sizes(solutions)
    common_x = solutions[0].x
    d = solutions[0].d
    if reference is not None:
        if reference.grid.map != solutions[0].grid.map or reference.N <= sizes[-1]:
            raise ConfigurationError(f"reference N={reference.N} must be finer than N={sizes[-1]} on the same map")
        truth = _restrict(reference, sizes[0])
    else:
        truth = exact_on_nodes(exact, common_x, d)
    if norm == "node" and not 0 <= node <= sizes[0]:
        raise ConfigurationError(f"node {node} is not a node of the coarsest grid N={sizes[0]}")

    U = extrapolate_solutions(solutions, p0, order_step, levels)
    deviation = np.abs(U - truth[None, None])
    errors = np.max(deviation, axis=2) if norm == "max" else deviation[:, :, node]

    floor = NOISE_FACTOR * np.finfo(float).eps * np.max(np.abs(truth), axis=0)
    orders = np.full((len(sizes) - 1,) + errors.shape[1:], np.nan)
    for g in range(len(sizes) - 1):
        for k in range(min(g, levels) + 1):
            for i in range(d):
                pair = errors[g:g + 2, k, i]
                if np.any(pair <= floor[i]):
                    logger.warning(
                        f"[order_study] N={sizes[g]}/{sizes[g + 1]} level {k} component {i + 1}: "
                        f"errors {pair[0]:.3e}/{pair[1]:.3e} at round-off level, no order"
                    )
                    continue
                try:
                    orders[g, k, i] = observed_order(errors[g, k, i], errors[g + 1, k, i])
                except UndefinedOrderError:
                    logger.warning(
                        f"[order_study] no order for N={sizes[g]}/{sizes[g + 1]} level {k} component {i + 1}"
                    )
    return OrderEstimate(
        grid_sizes=sizes,
        norm_kind=norm,
        node=node if norm == "node" else None,
        reference_n=reference.N if reference is not None else None,
        true_orders=true_orders(p0, order_step, levels),
        errors=errors,
        orders=orders,
    )
