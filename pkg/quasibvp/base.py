from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from .errors import ConfigurationError


class FrozenModel(BaseModel):
    """
    Immutable pydantic model shared by all quasibvp data types.

    Validation failures surface as ConfigurationError so callers only deal with
    the quasibvp exception hierarchy.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")

    def __init__(self, **data: Any):
        try:
            super().__init__(**data)
        except ValidationError as e:
            raise ConfigurationError(str(e)) from e


def readonly(values: Any, ndim: int) -> np.ndarray:
    """Return a float64, read-only copy of ``values`` with the given rank."""
    array = np.array(values, dtype=float)
    if array.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {array.shape}")
    array.setflags(write=False)
    return array
