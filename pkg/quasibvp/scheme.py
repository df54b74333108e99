"""
Non-standard finite-difference discretization of du/dx = f(x, u), g(u(0), u(inf)) = 0.

For every interval n = 0, ..., N-1 the scheme imposes

    U_{n+1} - U_n - a_{n+1/2} f(x_{n+1/2}, b_{n+1/2} U_{n+1} + c_{n+1/2} U_n) = 0

and the boundary block g(U_0, U_N) = 0 closes the system. Residual rows are
ordered interior blocks first, in increasing n, boundary block last.
"""
import logging
from typing import Callable, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import Field, field_validator, model_validator

from .base import FrozenModel, readonly
from .errors import EvaluationError
from .grid import QuasiUniformGrid, SchemeCoefficients

logger = logging.getLogger(__name__)

_SQRT_EPS = np.sqrt(np.finfo(float).eps)


class BcStructure(FrozenModel):
    """
    Shape of the boundary function.

    ``separated``: the first ``n_left`` components of g depend on U_0 only and
    the last ``n_right`` on U_N only. ``coupled``: any component may mix both ends.
    """

    kind: Literal["separated", "coupled"] = "coupled"
    n_left: int = Field(0, ge=0)
    n_right: int = Field(0, ge=0)

    @classmethod
    def separated(cls, n_left: int, n_right: int) -> "BcStructure":
        return cls(kind="separated", n_left=n_left, n_right=n_right)

    @classmethod
    def coupled(cls) -> "BcStructure":
        return cls(kind="coupled")

    @property
    def is_separated(self) -> bool:
        return self.kind == "separated"


class BvpSystem(FrozenModel):
    """
    First-order system du/dx = f(x, u) on [0, inf) with g(u(0), u(inf)) = 0.

    :param d: system dimension
    :param f: right-hand side, (x, u) -> d-vector
    :param g: boundary function, (u0, uN) -> d-vector
    :param f_jac: optional analytic df/du, (x, u) -> d x d
    :param g_jac: optional pair (dg/du0, dg/duN) of (u0, uN) -> d x d functions
    :param bc_structure: separated or coupled boundary conditions
    :param vectorized: f and f_jac accept x of shape (M,) and u of shape (M, d)
    """

    d: int = Field(ge=1)
    f: Callable
    g: Callable
    f_jac: Optional[Callable] = None
    g_jac: Optional[Tuple[Callable, Callable]] = None
    bc_structure: BcStructure = BcStructure()
    vectorized: bool = False
    name: str = "bvp"

    @model_validator(mode="after")
    def _check_bc_split(self):
        bc = self.bc_structure
        if bc.is_separated and bc.n_left + bc.n_right != self.d:
            raise ValueError(f"separated conditions need n_left + n_right = d = {self.d}")
        return self


class DiscreteSolution(FrozenModel):
    """Nodal unknowns U (row n = U_n) bound to the grid they live on."""

    grid: QuasiUniformGrid
    U: np.ndarray

    @field_validator("U", mode="before")
    @classmethod
    def _readonly(cls, v):
        array = np.array(v, dtype=float)
        if array.ndim == 1:
            array = array[:, None]
        return readonly(array, 2)

    @model_validator(mode="after")
    def _check_shape(self):
        if self.U.shape[0] != self.grid.N + 1:
            raise ValueError(f"expected {self.grid.N + 1} rows, got {self.U.shape[0]}")
        if not np.all(np.isfinite(self.U)):
            raise ValueError("solution values must be finite")
        return self

    @property
    def N(self) -> int:
        return self.grid.N

    @property
    def d(self) -> int:
        return self.U.shape[1]

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def component(self, index: int) -> np.ndarray:
        """1-based component column, matching the component labels used in reports."""
        return self.U[:, index - 1]


StateLike = Union[DiscreteSolution, np.ndarray]


def _state(U: StateLike, grid: QuasiUniformGrid, d: int) -> np.ndarray:
    values = U.U if isinstance(U, DiscreteSolution) else np.asarray(U, dtype=float)
    return values.reshape(grid.N + 1, d)


def _check_finite(values: np.ndarray, what: str) -> None:
    bad = ~np.all(np.isfinite(values.reshape(values.shape[0], -1)), axis=1)
    if np.any(bad):
        raise EvaluationError(f"{what} returned a non-finite value", node=int(np.argmax(bad)))


def _fd_columns(func: Callable[[np.ndarray], np.ndarray], u: np.ndarray, base: np.ndarray) -> np.ndarray:
    jac = np.empty((base.shape[0], u.shape[0]))
    for j in range(u.shape[0]):
        shifted = u.copy()
        shifted[j] += _SQRT_EPS * max(1.0, abs(u[j]))
        # use the representable step
        h = shifted[j] - u[j]
        jac[:, j] = (np.asarray(func(shifted), dtype=float) - base) / h
    return jac


def fd_jacobian_f(f: Callable, x: float, u: np.ndarray) -> np.ndarray:
    """
    Forward-difference approximation of df/du at a finite point x.

    Column j uses the step h_j = sqrt(eps) * max(1, |u_j|).
    """
    u = np.asarray(u, dtype=float)
    base = np.asarray(f(x, u), dtype=float)
    if not np.all(np.isfinite(base)):
        raise EvaluationError("f returned a non-finite value", node=f"x={x}")
    jac = _fd_columns(lambda v: f(x, v), u, base)
    if not np.all(np.isfinite(jac)):
        raise EvaluationError("f returned a non-finite value", node=f"x={x}")
    return jac


def _fd_jacobian_f_stacked(f: Callable, x: np.ndarray, V: np.ndarray) -> np.ndarray:
    base = np.asarray(f(x, V), dtype=float)
    jac = np.empty(V.shape + (V.shape[1],))
    for j in range(V.shape[1]):
        shifted = V.copy()
        shifted[:, j] += _SQRT_EPS * np.maximum(1.0, np.abs(V[:, j]))
        h = shifted[:, j] - V[:, j]
        jac[:, :, j] = (np.asarray(f(x, shifted), dtype=float) - base) / h[:, None]
    return jac


def _blended(coeffs: SchemeCoefficients, U: np.ndarray) -> np.ndarray:
    return coeffs.b[:, None] * U[1:] + coeffs.c[:, None] * U[:-1]


def _eval_f(sys: BvpSystem, x_mid: np.ndarray, V: np.ndarray) -> np.ndarray:
    if sys.vectorized:
        F = np.asarray(sys.f(x_mid, V), dtype=float).reshape(V.shape)
    else:
        F = np.array([sys.f(x, v) for x, v in zip(x_mid, V)], dtype=float).reshape(V.shape)
    _check_finite(F, "f")
    return F


def _eval_f_jac(sys: BvpSystem, x_mid: np.ndarray, V: np.ndarray) -> np.ndarray:
    d = sys.d
    if sys.f_jac is not None:
        if sys.vectorized:
            J = np.asarray(sys.f_jac(x_mid, V), dtype=float)
        else:
            J = np.array([sys.f_jac(x, v) for x, v in zip(x_mid, V)], dtype=float)
    elif sys.vectorized:
        J = _fd_jacobian_f_stacked(sys.f, x_mid, V)
    else:
        J = np.array([fd_jacobian_f(sys.f, x, v) for x, v in zip(x_mid, V)])
    J = J.reshape(len(x_mid), d, d)
    _check_finite(J, "df/du")
    return J


def _eval_g(sys: BvpSystem, U0: np.ndarray, UN: np.ndarray) -> np.ndarray:
    G = np.asarray(sys.g(U0, UN), dtype=float).reshape(sys.d)
    if not np.all(np.isfinite(G)):
        raise EvaluationError("g returned a non-finite value", node="boundary")
    return G


def _eval_g_jac(sys: BvpSystem, U0: np.ndarray, UN: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if sys.g_jac is not None:
        G0 = np.asarray(sys.g_jac[0](U0, UN), dtype=float).reshape(sys.d, sys.d)
        GN = np.asarray(sys.g_jac[1](U0, UN), dtype=float).reshape(sys.d, sys.d)
    else:
        base = _eval_g(sys, U0, UN)
        G0 = _fd_columns(lambda v: sys.g(v, UN), U0, base)
        GN = _fd_columns(lambda v: sys.g(U0, v), UN, base)
    if not (np.all(np.isfinite(G0)) and np.all(np.isfinite(GN))):
        raise EvaluationError("dg/du returned a non-finite value", node="boundary")
    return G0, GN


def residual(sys: BvpSystem, grid: QuasiUniformGrid, coeffs: SchemeCoefficients, U: StateLike) -> np.ndarray:
    """
    Residual of the scheme, a vector of length d (N + 1).

    :param sys: the boundary value problem
    :param grid: grid the unknowns live on
    :param coeffs: scheme coefficients of ``grid``
    :param U: nodal values, (N + 1) x d
    :return: interior blocks for n = 0..N-1 followed by g(U_0, U_N)
    """
    values = _state(U, grid, sys.d)
    F = _eval_f(sys, grid.midpoints, _blended(coeffs, values))
    interior = values[1:] - values[:-1] - coeffs.a[:, None] * F
    return np.concatenate([interior.ravel(), _eval_g(sys, values[0], values[-1])])


class BlockJacobian(FrozenModel):
    """
    Block bidiagonal Newton matrix with its boundary block row.

    ``lower[n]`` = dR_n/dU_n, ``upper[n]`` = dR_n/dU_{n+1}; ``g0`` and ``gN`` are
    the derivatives of the boundary block with respect to U_0 and U_N. Row and
    column order follow ``residual``.
    """

    lower: np.ndarray
    upper: np.ndarray
    g0: np.ndarray
    gN: np.ndarray
    bc_structure: BcStructure

    @field_validator("lower", "upper", mode="before")
    @classmethod
    def _blocks_readonly(cls, v):
        return readonly(v, 3)

    @field_validator("g0", "gN", mode="before")
    @classmethod
    def _corner_readonly(cls, v):
        return readonly(v, 2)

    @property
    def N(self) -> int:
        return self.lower.shape[0]

    @property
    def d(self) -> int:
        return self.lower.shape[1]

    @property
    def size(self) -> int:
        return self.d * (self.N + 1)

    def to_dense(self) -> np.ndarray:
        N, d = self.N, self.d
        dense = np.zeros((self.size, self.size))
        for n in range(N):
            rows = slice(n * d, (n + 1) * d)
            dense[rows, n * d:(n + 1) * d] = self.lower[n]
            dense[rows, (n + 1) * d:(n + 2) * d] = self.upper[n]
        dense[N * d:, :d] = self.g0
        dense[N * d:, N * d:] = self.gN
        return dense

    def matvec(self, v: np.ndarray) -> np.ndarray:
        V = np.asarray(v, dtype=float).reshape(self.N + 1, self.d)
        interior = np.einsum("nij,nj->ni", self.lower, V[:-1]) + np.einsum("nij,nj->ni", self.upper, V[1:])
        return np.concatenate([interior.ravel(), self.g0 @ V[0] + self.gN @ V[-1]])


def jacobian(sys: BvpSystem, grid: QuasiUniformGrid, coeffs: SchemeCoefficients, U: StateLike) -> BlockJacobian:
    """
    Jacobian of ``residual`` with respect to U.

    dR_n/dU_n = -I - a c J_f and dR_n/dU_{n+1} = I - a b J_f, with J_f taken at
    (x_{n+1/2}, b U_{n+1} + c U_n); J_f comes from ``sys.f_jac`` when given and
    from forward differences otherwise.
    """
    values = _state(U, grid, sys.d)
    J = _eval_f_jac(sys, grid.midpoints, _blended(coeffs, values))
    eye = np.eye(sys.d)
    scaled = coeffs.a[:, None, None] * J
    lower = -eye - coeffs.c[:, None, None] * scaled
    upper = eye - coeffs.b[:, None, None] * scaled
    g0, gN = _eval_g_jac(sys, values[0], values[-1])
    return BlockJacobian(lower=lower, upper=upper, g0=g0, gN=gN, bc_structure=sys.bc_structure)


def midpoint_weights(x_left: float, x_mid: float, x_right: float) -> Tuple[float, float]:
    """Linear-interpolation weights of the endpoint values at ``x_mid``; an infinite right end gives (1, 0)."""
    if np.isinf(x_right):
        return 1.0, 0.0
    right = (x_mid - x_left) / (x_right - x_left)
    return 1.0 - right, right


def legacy_midpoint_weights(grid: QuasiUniformGrid, n: int) -> Tuple[float, float]:
    """
    Weights (w_n, w_{n+1}) of the earlier midpoint formula built on x_n, x_{n+1}.

    On the last interval x_{n+1} = inf and the formula collapses to
    u_{N-1/2} = u_{N-1}: the boundary value U_N drops out of the midpoint.
    """
    if not 0 <= n < grid.N:
        raise IndexError(f"interval index {n} outside 0..{grid.N - 1}")
    return midpoint_weights(grid.nodes[n], grid.quarter_nodes[n, 1], grid.nodes[n + 1])


def legacy_coefficients(grid: QuasiUniformGrid) -> SchemeCoefficients:
    """Scheme coefficients with the earlier midpoint weights; ``a`` is unchanged."""
    weights = np.array([legacy_midpoint_weights(grid, n) for n in range(grid.N)])
    x14, _, x34 = grid.quarter_nodes.T
    return SchemeCoefficients(a=2.0 * (x34 - x14), b=weights[:, 1], c=weights[:, 0])
