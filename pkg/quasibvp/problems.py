"""
Benchmark problems with known exact solutions.

The colloid problem u'' = 2 sinh(u), u(0) = u0, u(inf) = 0 is solved as the
first-order system (u, u'); the linear fixture u'' = u with u(0) = 1,
u(inf) = 0 has the solution e^{-x}.
"""
import logging
from typing import Optional, Union

import numpy as np
from pydantic import Field

from .base import FrozenModel
from .errors import ConfigurationError, DomainError
from .grid import QuasiUniformGrid
from .newton import ParameterRamp
from .scheme import BcStructure, BvpSystem, DiscreteSolution

logger = logging.getLogger(__name__)

SQRT2 = np.sqrt(2.0)

XLike = Union[float, np.ndarray]


def _check_x(x: XLike) -> np.ndarray:
    x_arr = np.asarray(x, dtype=float)
    if np.any(~(x_arr >= 0.0)):
        raise DomainError(f"x must lie in [0, inf], got {x}")
    return x_arr


def _colloid_rhs(x, u):
    u = np.asarray(u, dtype=float)
    return np.stack([u[..., 1], 2.0 * np.sinh(u[..., 0])], axis=-1)


def _colloid_rhs_jac(x, u):
    u = np.asarray(u, dtype=float)
    jac = np.zeros(u.shape[:-1] + (2, 2))
    jac[..., 0, 1] = 1.0
    jac[..., 1, 0] = 2.0 * np.cosh(u[..., 0])
    return jac


_LEFT_FIRST = np.array([[1.0, 0.0], [0.0, 0.0]])
_RIGHT_FIRST = np.array([[0.0, 0.0], [1.0, 0.0]])


def colloid_system(u0: float) -> BvpSystem:
    """
    First-order form of u'' - 2 sinh(u) = 0, u(0) = u0, u(inf) = 0.

    :param u0: left boundary value, positive. example: 1.0
    """
    if not u0 > 0:
        raise ConfigurationError(f"u0 must be positive, got {u0}")

    def g(left, right):
        return np.array([left[0] - u0, right[0]])

    return BvpSystem(
        d=2,
        f=_colloid_rhs,
        f_jac=_colloid_rhs_jac,
        g=g,
        g_jac=(lambda left, right: _LEFT_FIRST, lambda left, right: _RIGHT_FIRST),
        bc_structure=BcStructure.separated(1, 1),
        vectorized=True,
        name=f"colloid(u0={u0:g})",
    )


def colloid_exact(u0: float, x: XLike) -> np.ndarray:
    """
    Exact solution (u, du/dx) of the colloid problem.

    Written in terms of t = exp(-sqrt(2) x) so the tail stays free of
    cancellation and x = inf gives (0, 0):
    u = 2 log1p(2 B t / (A - B t)), du/dx = -4 sqrt(2) A B t / (A^2 - B^2 t^2)
    with A = e^{u0/2} + 1 and B = e^{u0/2} - 1.

    :return: array of shape x.shape + (2,)
    """
    x_arr = _check_x(x)
    A, B = np.exp(0.5 * u0) + 1.0, np.expm1(0.5 * u0)
    t = np.exp(-SQRT2 * x_arr)
    field = 2.0 * np.log1p(2.0 * B * t / (A - B * t))
    # +0.0 turns the -0.0 at infinity into 0.0
    slope = -4.0 * SQRT2 * A * B * t / (A * A - (B * t) ** 2) + 0.0
    return np.stack([field, slope], axis=-1)


def colloid_dudx0(u0: float) -> float:
    """Missing initial condition du/dx(0) = -2 sqrt(cosh(u0) - 1)."""
    return float(-2.0 * np.sqrt(np.cosh(u0) - 1.0))


def _linear_rhs(x, u):
    u = np.asarray(u, dtype=float)
    return u[..., ::-1].copy()


def _linear_rhs_jac(x, u):
    u = np.asarray(u, dtype=float)
    return np.broadcast_to(np.array([[0.0, 1.0], [1.0, 0.0]]), u.shape[:-1] + (2, 2)).copy()


def linear_fixture() -> BvpSystem:
    """u' = v, v' = u with u(0) = 1 and u(inf) = 0; exact solution (e^{-x}, -e^{-x})."""

    def g(left, right):
        return np.array([left[0] - 1.0, right[0]])

    return BvpSystem(
        d=2,
        f=_linear_rhs,
        f_jac=_linear_rhs_jac,
        g=g,
        g_jac=(lambda left, right: _LEFT_FIRST, lambda left, right: _RIGHT_FIRST),
        bc_structure=BcStructure.separated(1, 1),
        vectorized=True,
        name="linear",
    )


def linear_exact(x: XLike) -> np.ndarray:
    decay = np.exp(-_check_x(x))
    return np.stack([decay, 0.0 - decay], axis=-1)


def constant_rows(grid: QuasiUniformGrid, values) -> DiscreteSolution:
    values = np.asarray(values, dtype=float)
    return DiscreteSolution(grid=grid, U=np.tile(values, (grid.N + 1, 1)))


class ColloidProblem(FrozenModel):
    """The colloid benchmark for one boundary value u0 > 0."""

    u0: float = Field(gt=0, allow_inf_nan=False)

    @property
    def label(self) -> str:
        return "colloid"

    def system(self) -> BvpSystem:
        return colloid_system(self.u0)

    def exact(self, x: XLike) -> np.ndarray:
        return colloid_exact(self.u0, x)

    def dudx0(self) -> float:
        return colloid_dudx0(self.u0)

    def first_guess(self, grid: QuasiUniformGrid) -> DiscreteSolution:
        """Constant rows (u0, -1); for u0 = 1 this is the iterate of the benchmark runs."""
        return constant_rows(grid, [self.u0, -1.0])

    def ramp(self, step: float = 1.0) -> Optional[ParameterRamp]:
        """Unit-step continuation in u0 (step, 2 step, ..., u0), or None when u0 <= step."""
        if self.u0 <= step:
            return None
        values = tuple(float(v) for v in np.arange(step, self.u0, step)) + (self.u0,)
        return ParameterRamp(
            family=colloid_system,
            values=values,
            first_guess=lambda grid: constant_rows(grid, [values[0], -1.0]),
        )


class LinearProblem(FrozenModel):
    """The linear fixture behind the same interface as the colloid benchmark."""

    @property
    def label(self) -> str:
        return "linear"

    def system(self) -> BvpSystem:
        return linear_fixture()

    def exact(self, x: XLike) -> np.ndarray:
        return linear_exact(x)

    def dudx0(self) -> float:
        return -1.0

    def first_guess(self, grid: QuasiUniformGrid) -> DiscreteSolution:
        return constant_rows(grid, [1.0, -1.0])

    def ramp(self, step: float = 1.0) -> Optional[ParameterRamp]:
        return None


Problem = Union[ColloidProblem, LinearProblem]
