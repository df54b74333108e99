__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    ContinuationError,
    DivergenceError,
    DomainError,
    EvaluationError,
    QuasiBvpError,
    SingularJacobianError,
    UndefinedOrderError,
)
from .grid import GridMapSpec, MapKind, QuasiUniformGrid, SchemeCoefficients, build_grid, map_eval, scheme_coefficients  # noqa: E402
from .newton import ContinuationRun, NewtonConfig, NewtonReport, continuation_solve, newton_solve  # noqa: E402
from .problems import (  # noqa: E402
    ColloidProblem,
    LinearProblem,
    colloid_dudx0,
    colloid_exact,
    colloid_system,
    constant_rows,
    linear_fixture,
)
from .richardson import (  # noqa: E402
    ErrorEstimate,
    ExtrapolationTable,
    OrderEstimate,
    build_table,
    error_estimate,
    extrapolate_step,
    global_error,
    observed_order,
    order_study,
)
from .scheme import BcStructure, BvpSystem, DiscreteSolution  # noqa: E402

__all__ = [
    "BcStructure",
    "BvpSystem",
    "ColloidProblem",
    "ConfigurationError",
    "ContinuationError",
    "ContinuationRun",
    "DiscreteSolution",
    "DivergenceError",
    "DomainError",
    "ErrorEstimate",
    "EvaluationError",
    "ExtrapolationTable",
    "GridMapSpec",
    "LinearProblem",
    "MapKind",
    "NewtonConfig",
    "NewtonReport",
    "OrderEstimate",
    "QuasiBvpError",
    "QuasiUniformGrid",
    "SchemeCoefficients",
    "SingularJacobianError",
    "UndefinedOrderError",
    "build_grid",
    "build_table",
    "colloid_dudx0",
    "colloid_exact",
    "colloid_system",
    "constant_rows",
    "continuation_solve",
    "error_estimate",
    "extrapolate_step",
    "global_error",
    "linear_fixture",
    "map_eval",
    "newton_solve",
    "observed_order",
    "order_study",
    "scheme_coefficients",
]
