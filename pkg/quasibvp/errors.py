from typing import Any, Optional, Union


class QuasiBvpError(Exception):
    """Base class for every error raised by quasibvp."""


class ConfigurationError(QuasiBvpError, ValueError):
    """Invalid parameters: bad map constant, grid size, grid list or pairing."""


class DomainError(QuasiBvpError, ValueError):
    """An argument lies outside the domain of the function it was passed to."""


class EvaluationError(QuasiBvpError, ArithmeticError):
    """The right-hand side or the boundary function returned a non-finite value."""

    def __init__(self, message: str, node: Union[int, str]):
        super().__init__(f"{message} (node {node})")
        self.node = node


class SingularJacobianError(QuasiBvpError, ArithmeticError):
    """The Newton matrix is singular or numerically singular."""

    def __init__(self, message: str, pivot_index: int):
        super().__init__(f"{message} (pivot {pivot_index})")
        self.pivot_index = pivot_index


class DivergenceError(QuasiBvpError, ArithmeticError):
    """A Newton iterate became non-finite."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


class UndefinedOrderError(QuasiBvpError, ValueError):
    """The observed order is undefined because one of the errors is zero."""


class ContinuationError(QuasiBvpError, RuntimeError):
    """A solver failure during mesh continuation, tagged with the failing grid."""

    def __init__(self, message: str, n: int, run: Optional[Any] = None):
        super().__init__(f"{message} (N={n})")
        self.n = n
        self.run = run
