"""
Quasi-uniform grids on [0, inf] generated from uniform grids on [0, 1].

A grid generating function x(xi) maps the uniform nodes xi_n = n/N onto
[0, inf]; the last node lands at infinity. Non-integer nodes
x_{n+alpha} = x((n + alpha)/N) stay finite, so the scheme coefficients are
built from the quarter nodes only and never touch x_N.
"""
import logging
from enum import Enum
from typing import Union

import numpy as np
from pydantic import Field, field_validator, model_validator

from .base import FrozenModel, readonly
from .errors import ConfigurationError, DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class MapKind(str, Enum):
    LOGARITHMIC = "log"
    ALGEBRAIC = "alg"


class GridMapSpec(FrozenModel):
    """
    Grid generating function and its control parameter.

    :param kind: ``log`` for x = -c ln(1 - xi), ``alg`` for x = c xi / (1 - xi)
    :param c: control parameter, in units of x. example: 10.0
    """

    kind: MapKind = MapKind.ALGEBRAIC
    c: float = Field(10.0, gt=0, allow_inf_nan=False)

    def __call__(self, xi: ArrayLike) -> ArrayLike:
        return map_eval(self, xi)

    def inverse(self, x: ArrayLike) -> ArrayLike:
        """Map x in [0, inf] back to xi in [0, 1]."""
        x_arr = np.asarray(x, dtype=float)
        if np.any(~(x_arr >= 0)):
            raise DomainError(f"x must lie in [0, inf], got {x}")
        with np.errstate(invalid="ignore"):
            if self.kind is MapKind.LOGARITHMIC:
                xi = -np.expm1(-x_arr / self.c)
            else:
                xi = x_arr / (x_arr + self.c)
        xi = np.where(np.isinf(x_arr), 1.0, xi)
        return float(xi) if xi.ndim == 0 else xi


def _check_map(spec: GridMapSpec) -> None:
    # model_construct() bypasses validation
    if not (spec.c > 0 and np.isfinite(spec.c)):
        raise ConfigurationError(f"map parameter c must be positive and finite, got {spec.c}")


def _map_from_complement(spec: GridMapSpec, xi: np.ndarray, one_minus_xi: np.ndarray) -> np.ndarray:
    # Both maps are evaluated from xi and 1 - xi; grids pass the exact complement (N - n)/N.
    with np.errstate(divide="ignore"):
        if spec.kind is MapKind.LOGARITHMIC:
            # +0.0 keeps x_0 a positive zero
            return -spec.c * np.log(one_minus_xi) + 0.0
        return spec.c * xi / one_minus_xi


def map_eval(spec: GridMapSpec, xi: ArrayLike) -> ArrayLike:
    """
    Evaluate the grid generating function at ``xi``.

    :param spec: the map and its control parameter
    :param xi: point(s) of the reference interval [0, 1]
    :return: x(xi); +inf at xi = 1
    """
    _check_map(spec)
    xi_arr = np.asarray(xi, dtype=float)
    if np.any(~((xi_arr >= 0.0) & (xi_arr <= 1.0))):
        raise DomainError(f"xi must lie in [0, 1], got {xi}")
    x = _map_from_complement(spec, xi_arr, 1.0 - xi_arr)
    return float(x) if x.ndim == 0 else x


class QuasiUniformGrid(FrozenModel):
    """
    Image of the uniform grid xi_n = n/N under a grid generating function.

    ``nodes`` holds x_0 = 0 < x_1 < ... < x_{N-1} < x_N = inf and
    ``quarter_nodes[n]`` the finite triple (x_{n+1/4}, x_{n+1/2}, x_{n+3/4}).
    """

    map: GridMapSpec
    N: int = Field(ge=1)
    nodes: np.ndarray
    quarter_nodes: np.ndarray

    @field_validator("nodes", mode="before")
    @classmethod
    def _nodes_readonly(cls, v):
        return readonly(v, 1)

    @field_validator("quarter_nodes", mode="before")
    @classmethod
    def _quarters_readonly(cls, v):
        return readonly(v, 2)

    @model_validator(mode="after")
    def _check_ordering(self):
        x, q = self.nodes, self.quarter_nodes
        if x.shape != (self.N + 1,) or q.shape != (self.N, 3):
            raise ValueError(f"inconsistent grid arrays for N={self.N}: {x.shape}, {q.shape}")
        if x[0] != 0.0 or x[-1] != np.inf:
            raise ValueError("grid must start at 0 and end at +inf")
        if not np.all(np.isfinite(x[:-1])) or not np.all(np.isfinite(q)):
            raise ValueError("all nodes but the last must be finite")
        interleaved = np.column_stack([x[:-1], q, x[1:]])
        if not np.all(np.diff(interleaved, axis=1) > 0):
            raise ValueError("nodes and quarter nodes must be strictly increasing")
        return self

    @property
    def xi(self) -> np.ndarray:
        return np.arange(self.N + 1) / self.N

    @property
    def midpoints(self) -> np.ndarray:
        return self.quarter_nodes[:, 1]

    def is_nested_in(self, other: "QuasiUniformGrid") -> bool:
        """True when every node of this grid is an even node of ``other``."""
        return self.map == other.map and other.N == 2 * self.N


def build_grid(spec: GridMapSpec, N: int) -> QuasiUniformGrid:
    """
    Build the quasi-uniform grid with N intervals.

    :param spec: grid generating function
    :param N: number of intervals. example: 40
    :return: the grid with its quarter nodes precomputed
    """
    _check_map(spec)
    if int(N) != N or N < 1:
        raise ConfigurationError(f"number of intervals must be a positive integer, got {N}")
    N = int(N)
    n = np.arange(N + 1, dtype=float)
    nodes = _map_from_complement(spec, n / N, (N - n) / N)
    # quarter nodes: xi = k / (4N) with k = 4n + 1, 4n + 2, 4n + 3
    k = 4.0 * n[:-1, None] + np.array([1.0, 2.0, 3.0])
    quarter_nodes = _map_from_complement(spec, k / (4 * N), (4 * N - k) / (4 * N))
    return QuasiUniformGrid(map=spec, N=N, nodes=nodes, quarter_nodes=quarter_nodes)


class SchemeCoefficients(FrozenModel):
    """Per-interval coefficients a_{n+1/2}, b_{n+1/2}, c_{n+1/2} of the scheme."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @field_validator("a", "b", "c", mode="before")
    @classmethod
    def _readonly(cls, v):
        return readonly(v, 1)

    @model_validator(mode="after")
    def _check_ranges(self):
        if not (self.a.shape == self.b.shape == self.c.shape):
            raise ValueError("coefficient arrays must have the same length")
        if not np.all(self.a > 0):
            raise ValueError("a_{n+1/2} must be positive")
        eps = np.finfo(float).eps
        if np.any(np.abs(self.b + self.c - 1.0) > 2 * eps):
            raise ValueError("b_{n+1/2} + c_{n+1/2} must equal 1")
        return self

    @property
    def N(self) -> int:
        return len(self.a)


def scheme_coefficients(grid: QuasiUniformGrid) -> SchemeCoefficients:
    """
    Coefficients of the scheme from the quarter nodes of ``grid``.

    a = 2 (x_{n+3/4} - x_{n+1/4}), b = (x_{n+1/2} - x_{n+1/4}) / (x_{n+3/4} - x_{n+1/4})
    and c = 1 - b. Only the quarter nodes enter, never x_N.
    """
    x14, x12, x34 = grid.quarter_nodes.T
    width = x34 - x14
    b = (x12 - x14) / width
    return SchemeCoefficients(a=2.0 * width, b=b, c=1.0 - b)
