"""RunConfig: one validated record per CLI run, built from a config file and flags."""

import logging
import os
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_serializer, field_validator

from takagi.errors import ContractError, DomainError
from takagi.rationals import format_rational, parse_rational
from takagi.signs import SignProvider, parse_provider

logger = logging.getLogger(__name__)

Command = Literal[
    "render", "levelset", "dimension", "jsr", "extremal", "gray", "line", "simulate", "matrices", "selftest"
]
Experiment = Literal["z-shape", "z-growth", "zero-dimension", "gw", "hitting", "model1-max", "table"]

# execution-only settings; artifacts must not depend on them
NOT_ECHOED = {"jobs", "verbose", "config"}


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)

    command: Command
    config: Optional[str] = None

    # function
    function: str = "all-plus"
    function_file: Optional[str] = None

    # grids and covers
    depth: int = 10
    min_depth: int = 1
    max_depth: int = 16
    y: Optional[Fraction] = None
    slope: int = 0
    intercept: Optional[Fraction] = None
    max_set: bool = False
    method: Literal["lsq", "ratio"] = "lsq"
    skip: int = 4
    period: int = 1
    parity: Optional[int] = None

    # dimension
    pieces: Optional[str] = None
    geometric: bool = False
    random_moran: bool = False
    counts: Optional[str] = None

    # spectra
    matrices: Optional[str] = None
    max_len: int = 8
    norm: Literal["entry-sum"] = "entry-sum"
    k_max: int = 60
    rho_scan: bool = False

    # constructions
    stages: int = 8
    which: Literal["zero", "two-fifths", "bounds"] = "two-fifths"
    m_max: int = 4
    extremal: bool = False

    # simulation
    experiment: Experiment = "zero-dimension"
    model: int = 2
    p: Fraction = Fraction(1, 2)
    trials: int = 100
    seed_base: int = 0
    level: int = 1
    horizon: int = 10000
    k_trunc: int = 3

    # matrices / selftest
    check: Optional[str] = None
    name: Optional[str] = None
    matrices_dir: Optional[str] = None
    mc: bool = False

    # output
    out: Optional[str] = None
    format: Literal["csv", "json", "svg"] = "json"

    jobs: int = Field(default_factory=lambda: os.cpu_count() or 1)
    verbose: int = 0

    @field_validator("y", "intercept", "p", mode="before")
    @classmethod
    def _rational(cls, v, info):
        if v is None:
            return None
        return parse_rational(v, flag=info.field_name.replace("_", "-"))

    @field_validator("depth", "max_depth", "max_len", "stages", "trials", "jobs", "horizon")
    @classmethod
    def _non_negative(cls, v, info):
        if v < 0:
            raise DomainError(f"{info.field_name.replace('_', '-')}: must be non-negative, got {v}")
        return v

    @field_validator("model")
    @classmethod
    def _model(cls, v):
        if v not in (1, 2):
            raise ContractError(f"model: expected 1 or 2, got {v}")
        return v

    @field_serializer("y", "intercept", "p")
    def _dump_rational(self, v: Optional[Fraction]) -> Optional[str]:
        return None if v is None else format_rational(v)

    def provider(self) -> SignProvider:
        """The sign provider named by --function, or read from --function-file."""
        if self.function_file:
            path = Path(self.function_file)
            if not path.is_file():
                raise ContractError(f"function-file: no such file {self.function_file}")
            return parse_provider(path.read_text())
        return parse_provider(self.function)

    def echo(self) -> Dict[str, str]:
        """Effective settings as strings, in field order, for artifact headers."""
        data = self.model_dump(exclude=NOT_ECHOED, exclude_none=True)
        return {key: _text(value) for key, value in data.items()}


def _text(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _key(raw: str) -> str:
    return raw.strip().lstrip("-").replace("-", "_")


def read_config_file(path: str) -> Dict[str, str]:
    """Flat `key = value` lines; `#` starts a comment, keys use flag names."""
    source = Path(path)
    if not source.is_file():
        raise ContractError(f"config: no such file {path}")
    values: Dict[str, str] = {}
    for number, raw in enumerate(source.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ContractError(f"config: line {number} of {path} is not key = value")
        key, value = line.split("=", 1)
        values[_key(key)] = value.strip()
    logger.debug("read %d settings from %s", len(values), path)
    return values


def build_config(flags: Mapping[str, Any]) -> RunConfig:
    """Flags override file values; a flag left at None falls back to the file or the default."""
    given = {_key(k): v for k, v in flags.items() if v is not None}
    merged: Dict[str, Any] = {}
    if given.get("config"):
        merged.update(read_config_file(given["config"]))
    merged.update(given)
    try:
        return RunConfig(**merged)
    except ValidationError as e:
        error = e.errors()[0]
        flag = "-".join(str(part) for part in error["loc"]).replace("_", "-") or "config"
        raise ContractError(f"{flag}: {error['msg']}") from e
