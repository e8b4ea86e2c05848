from fractions import Fraction
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, field_serializer, field_validator
from scipy import stats

from takagi.rationals import format_rational, parse_rational


class CoverReport(BaseModel):
    """Per-depth surviving-cell counts of one cover, plus the box-dimension fit."""

    target: str = ""
    depths: List[int]
    counts: List[int]
    fitted_dimension: Optional[float] = None
    residual: Optional[float] = None
    method: str = "lsq"


class JsrBracket(BaseModel):
    lower: float
    upper: float
    witness_product: str
    length: int
    norm: str = "entry-sum"


class Estimate(BaseModel):
    mean: float
    std_error: float
    trials: int
    target: Optional[float] = None

    def within(self, value: float, sigmas: float = 3.0, slack: float = 0.0) -> bool:
        return abs(self.mean - value) <= sigmas * self.std_error + slack

    def p_value(self, value: float) -> float:
        """Two-sided normal p-value of the mean against `value`."""
        if self.std_error == 0:
            return 1.0 if self.mean == value else 0.0
        return float(2 * stats.norm.sf(abs(self.mean - value) / self.std_error))


class TrialRecord(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: int
    seed: int
    p: Fraction
    depth: int
    observables: Dict[str, Union[int, float, bool, None, List[int]]] = {}

    @field_validator("p", mode="before")
    @classmethod
    def _parse_p(cls, v):
        return parse_rational(v, flag="p")

    @field_serializer("p")
    def _dump_p(self, p: Fraction) -> str:
        return format_rational(p)


class IdentityCheck(BaseModel):
    name: str
    passed: bool
    detail: str = ""


class SelfTestReport(BaseModel):
    checks: List[IdentityCheck] = []

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(IdentityCheck(name=name, passed=passed, detail=detail))
