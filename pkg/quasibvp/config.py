"""
Run configuration: built-in defaults < YAML config file < command-line flags.
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional, Tuple, Union

import yaml
from pydantic import Field, field_validator, model_validator

from .base import FrozenModel
from .errors import ConfigurationError
from .grid import GridMapSpec
from .newton import NewtonConfig, check_doubling
from .problems import ColloidProblem, LinearProblem, Problem

logger = logging.getLogger(__name__)

DEFAULT_N_LIST = tuple(5 * 2**k for k in range(11))

# fields that only say where results go; they do not change the results
OUTPUT_FIELDS = {"output", "output_path", "overwrite"}


class QuantitySpec(FrozenModel):
    """
    One scalar of the solution: component ``component`` (1-based) at node ``node``
    of the coarsest grid.
    """

    component: int = Field(2, ge=1)
    node: int = Field(0, ge=0)

    @property
    def label(self) -> str:
        return f"U{self.component}[{self.node}]"

    @classmethod
    def parse(cls, text: str) -> "QuantitySpec":
        """Parse ``comp=<c>,node=<n>``."""
        values: Dict[str, Any] = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            key, sep, value = part.partition("=")
            if not sep or key.strip() not in ("comp", "component", "node"):
                raise ConfigurationError(f"bad quantity '{text}', expected comp=<1|2>,node=<int>")
            try:
                values["node" if key.strip() == "node" else "component"] = int(value)
            except ValueError as e:
                raise ConfigurationError(f"bad quantity '{text}': {value} is not an integer") from e
        return cls(**values)


class RunConfig(FrozenModel):
    """Everything one command needs; defaults reproduce the benchmark set-up."""

    problem: Literal["colloid", "linear"] = "colloid"
    u0: float = Field(1.0, gt=0, allow_inf_nan=False)
    map: GridMapSpec = GridMapSpec()
    n_list: Tuple[int, ...] = DEFAULT_N_LIST
    tol: float = Field(1e-12, gt=0)
    max_iter: int = Field(50, ge=1)
    damping: float = Field(1.0, gt=0, le=1)
    parameter_step: float = Field(1.0, gt=0)
    p0: float = Field(2.0, gt=0)
    order_step: float = Field(2.0, gt=0)
    levels: int = Field(2, ge=0)
    quantity: QuantitySpec = QuantitySpec()
    pair: Optional[Tuple[int, int]] = None
    reference_n: Optional[int] = Field(None, ge=1)
    norm: Literal["max", "node"] = "max"
    with_coarse: bool = False
    output: Literal["csv", "json"] = "csv"
    output_path: Optional[Path] = None
    overwrite: bool = False

    @field_validator("n_list", mode="before")
    @classmethod
    def _parse_n_list(cls, v):
        if isinstance(v, str):
            v = [item for item in v.split(",") if item.strip()]
        return tuple(check_doubling(v))

    @field_validator("quantity", mode="before")
    @classmethod
    def _parse_quantity(cls, v):
        return QuantitySpec.parse(v) if isinstance(v, str) else v

    @field_validator("pair", mode="before")
    @classmethod
    def _parse_pair(cls, v):
        if isinstance(v, str):
            v = tuple(int(item) for item in v.split(",") if item.strip())
        return v

    @model_validator(mode="after")
    def _check_pair(self):
        if self.pair is not None:
            coarse, fine = self.pair
            if coarse < 1 or fine != 2 * coarse:
                raise ValueError(f"pair must be (N, 2N), got {self.pair}")
        return self

    def make_problem(self) -> Problem:
        return ColloidProblem(u0=self.u0) if self.problem == "colloid" else LinearProblem()

    def newton_config(self) -> NewtonConfig:
        return NewtonConfig(tol=self.tol, max_iter=self.max_iter, damping=self.damping)

    def metadata(self) -> Dict[str, Any]:
        """Run parameters stamped into every output file."""
        data = self.model_dump(mode="json", exclude=OUTPUT_FIELDS)
        data["map"] = self.map.kind.value
        data["c"] = self.map.c
        data["config_hash"] = config_hash(self)
        return data


def config_hash(cfg: RunConfig) -> str:
    """Short stable id of the result-relevant settings: sha256 of the sorted JSON dump, 8 hex chars."""
    config_json = json.dumps(cfg.model_dump(mode="json", exclude=OUTPUT_FIELDS), sort_keys=True)
    return hashlib.sha256(config_json.encode()).hexdigest()[:8]


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a YAML mapping of RunConfig keys."""
    path = Path(path)
    try:
        with path.open() as fh:
            data = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigurationError(f"cannot read config file {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigurationError(f"config file {path} is not valid YAML: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"config file {path} must hold a mapping, got {type(data).__name__}")
    unknown = set(data) - set(RunConfig.model_fields)
    if unknown:
        raise ConfigurationError(f"unknown keys in {path}: {sorted(unknown)}")
    logger.info(f"[load_config_file] {path}: {sorted(data)}")
    return data


def _merge_map(base: Any, override: Any) -> Any:
    base = base.model_dump() if isinstance(base, GridMapSpec) else dict(base or {})
    override = override.model_dump() if isinstance(override, GridMapSpec) else dict(override)
    return {**base, **override}


def build_run_config(config_path: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Merge defaults, the optional config file and flag overrides into a RunConfig.

    ``overrides`` holds only the flags that were given; ``None`` values are ignored.
    Partial ``map`` settings (only ``kind`` or only ``c``) are merged key by key.
    """
    data: Dict[str, Any] = load_config_file(config_path) if config_path is not None else {}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "map" and "map" in data:
            data["map"] = _merge_map(data["map"], value)
        else:
            data[key] = value
    return RunConfig(**data)
