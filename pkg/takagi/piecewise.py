"""Exact partial sums f_n on the dyadic grid.

Values are stored as integers scaled by 2**n, so f_n(j / 2**n) = v_j / 2**n and
every bound in this package becomes an integer comparison.
"""

import logging
from fractions import Fraction
from math import floor
from typing import Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from takagi.errors import ContractError, DomainError, IdentityError, ResourceError
from takagi.signs import SignProvider

logger = logging.getLogger(__name__)

DENSE_DEPTH_CAP = 26
# |f_n| <= 2/3, so scaled values and cell indices fit int64 through this depth
INT64_DEPTH = 62


class DyadicValue(BaseModel):
    """numerator / 2**exponent, kept canonical (odd numerator or exponent 0)."""

    model_config = ConfigDict(frozen=True)

    numerator: int
    exponent: int = 0

    @model_validator(mode="before")
    @classmethod
    def _canonical(cls, data):
        if isinstance(data, dict):
            num, exp = int(data.get("numerator", 0)), int(data.get("exponent", 0))
            if exp < 0:
                num, exp = num << -exp, 0
            if num == 0:
                exp = 0
            while exp > 0 and num % 2 == 0:
                num //= 2
                exp -= 1
            return {"numerator": num, "exponent": exp}
        return data

    @classmethod
    def of(cls, numerator: int, exponent: int = 0) -> "DyadicValue":
        return cls(numerator=numerator, exponent=exponent)

    @classmethod
    def from_fraction(cls, value: Union[Fraction, int]) -> "DyadicValue":
        value = Fraction(value)
        den = value.denominator
        if den & (den - 1):
            raise DomainError(f"{value} is not a dyadic rational")
        return cls(numerator=value.numerator, exponent=den.bit_length() - 1)

    @classmethod
    def nearest(cls, value: Fraction, exponent: int) -> "DyadicValue":
        """Dyadic k / 2**exponent closest to `value` (ties round down)."""
        scaled = Fraction(value) * (1 << exponent)
        k = floor(scaled)
        if scaled - k > Fraction(1, 2):
            k += 1
        return cls(numerator=k, exponent=exponent)

    def to_fraction(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.exponent)

    def __float__(self) -> float:
        return self.numerator / (1 << self.exponent)

    def __str__(self) -> str:
        if self.exponent == 0:
            return str(self.numerator)
        return f"{self.numerator}/2^{self.exponent}"


class GridFunction(BaseModel):
    """f_n on the grid j / 2**n: values v (length 2**n + 1) and slopes s (length 2**n)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    depth: int
    values: np.ndarray
    slopes: np.ndarray

    @model_validator(mode="after")
    def _check_shape(self):
        cells = 1 << self.depth
        if self.values.shape != (cells + 1,) or self.slopes.shape != (cells,):
            raise ContractError(
                f"grid at depth {self.depth} needs {cells + 1} values and {cells} slopes, "
                f"got {self.values.shape[0]} and {self.slopes.shape[0]}"
            )
        return self

    @classmethod
    def zero(cls) -> "GridFunction":
        return cls(depth=0, values=np.zeros(2, dtype=np.int64), slopes=np.zeros(1, dtype=np.int64))

    @property
    def cells(self) -> int:
        return 1 << self.depth

    def value_at(self, j: int) -> Fraction:
        return Fraction(int(self.values[j]), self.cells)

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """Scaled envelope [min - 1, max + 1] of every cell, in units of 2**-n."""
        left, right = self.values[:-1], self.values[1:]
        return np.minimum(left, right) - 1, np.maximum(left, right) + 1

    def violations(self) -> list:
        """Names of the grid invariants that fail; empty for a valid partial sum."""
        bad = []
        if not np.array_equal(np.diff(self.values), self.slopes):
            bad.append("linearity")
        if self.values[0] != 0 or self.values[-1] != 0:
            bad.append("endpoints")
        if np.any((self.slopes - self.depth) % 2 != 0):
            bad.append("slope parity")
        if np.any(np.abs(self.slopes) > self.depth):
            bad.append("slope range")
        if self.depth % 2 == 0 and np.any(self.values % 2 != 0):
            bad.append("even values")
        return bad

    def check_invariants(self) -> None:
        bad = self.violations()
        if bad:
            raise IdentityError(f"grid invariants failed at depth {self.depth}: {', '.join(bad)}")


def refine(gf: GridFunction, provider: SignProvider) -> GridFunction:
    """One level deeper: the new tent adds w_{n,j} * 2**-(n+1) at each cell midpoint."""
    if gf.depth + 1 > DENSE_DEPTH_CAP:
        raise ResourceError(f"depth: dense grids stop at {DENSE_DEPTH_CAP}, use the sparse cell sets")
    w = provider.level(gf.depth).astype(np.int64)
    if len(w) != gf.cells:
        raise ContractError(f"provider returned {len(w)} signs for level {gf.depth}")
    slopes = np.empty(2 * gf.cells, dtype=np.int64)
    slopes[0::2] = gf.slopes + w
    slopes[1::2] = gf.slopes - w
    values = np.empty(2 * gf.cells + 1, dtype=np.int64)
    values[0::2] = 2 * gf.values
    values[1::2] = gf.values[:-1] + gf.values[1:] + w
    return GridFunction(depth=gf.depth + 1, values=values, slopes=slopes)


def build(provider: SignProvider, depth: int) -> GridFunction:
    if depth < 0:
        raise DomainError(f"depth: {depth} is negative")
    if depth > DENSE_DEPTH_CAP:
        raise ResourceError(f"depth: dense grids stop at {DENSE_DEPTH_CAP}, got {depth}")
    gf = GridFunction.zero()
    for _ in range(depth):
        gf = refine(gf, provider)
    return gf


def envelope(gf: GridFunction, j: int) -> Tuple[DyadicValue, DyadicValue]:
    """[min f_n - 2**-n, max f_n + 2**-n] on I_{n,j}; f lies inside it."""
    if not 0 <= j < gf.cells:
        raise DomainError(f"cell index j={j} outside [0, 2^{gf.depth})")
    left, right = int(gf.values[j]), int(gf.values[j + 1])
    return (
        DyadicValue.of(min(left, right) - 1, gf.depth),
        DyadicValue.of(max(left, right) + 1, gf.depth),
    )


def tent(t: Fraction) -> Fraction:
    """Distance from t to the nearest integer."""
    frac = t - floor(t)
    return min(frac, 1 - frac)


def partial_sum(provider: SignProvider, x: Union[Fraction, DyadicValue], m: int) -> Fraction:
    """f_m(x) = sum_{k<m} w_k(x) 2**-k tent(2**k x), exactly."""
    if isinstance(x, DyadicValue):
        x = x.to_fraction()
    x = Fraction(x)
    if not 0 <= x <= 1:
        raise DomainError(f"x: {x} outside [0, 1]")
    total = Fraction(0)
    for k in range(m):
        scaled = x * (1 << k)
        j = min(floor(scaled), (1 << k) - 1)
        total += int(provider.sign(k, j)) * tent(scaled) / (1 << k)
    return total


def eval_enclosure(
    provider: SignProvider, x: Union[Fraction, DyadicValue], precision: int
) -> Tuple[DyadicValue, DyadicValue]:
    """Interval of width 2**(1-m) around f_m(x) that contains f(x)."""
    point = x if isinstance(x, DyadicValue) else DyadicValue.from_fraction(Fraction(x))
    value = DyadicValue.from_fraction(partial_sum(provider, point, precision))
    tail = Fraction(1, 1 << precision)
    return (
        DyadicValue.from_fraction(value.to_fraction() - tail),
        DyadicValue.from_fraction(value.to_fraction() + tail),
    )


class CellSet(BaseModel):
    """Sparse counterpart of GridFunction: only the listed cells at one depth.

    `values` are scaled left-endpoint values and `slopes` the cell slopes, so the
    right endpoint is values + slopes.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    depth: int
    cells: np.ndarray
    values: np.ndarray
    slopes: np.ndarray

    @classmethod
    def root(cls) -> "CellSet":
        zero = np.zeros(1, dtype=np.int64)
        return cls(depth=0, cells=zero, values=zero.copy(), slopes=zero.copy())

    @classmethod
    def from_grid(cls, gf: GridFunction, mask: Optional[np.ndarray] = None) -> "CellSet":
        cells = np.arange(gf.cells, dtype=np.int64)
        if mask is not None:
            cells = cells[mask]
        return cls(depth=gf.depth, cells=cells, values=gf.values[cells], slopes=gf.slopes[cells])

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def right(self) -> np.ndarray:
        return self.values + self.slopes

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        right = self.right
        return np.minimum(self.values, right) - 1, np.maximum(self.values, right) + 1

    def refine_with(self, w: np.ndarray) -> "CellSet":
        """Split every cell in two using the given level signs, one per cell."""
        cells, values, slopes = self.cells, self.values, self.slopes
        w = np.asarray(w, dtype=np.int64)
        if self.depth + 1 > INT64_DEPTH and cells.dtype != object:
            logger.debug("depth %d: switching %d cells to Python integers", self.depth + 1, len(cells))
            cells, values, slopes = (a.astype(object) for a in (cells, values, slopes))
            w = w.astype(object)
        return CellSet(
            depth=self.depth + 1,
            cells=np.column_stack((2 * cells, 2 * cells + 1)).ravel(),
            values=np.column_stack((2 * values, 2 * values + slopes + w)).ravel(),
            slopes=np.column_stack((slopes + w, slopes - w)).ravel(),
        )

    def refine(self, provider: SignProvider) -> "CellSet":
        return self.refine_with(provider.signs(self.depth, self.cells))

    def refine_pair(self, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> "CellSet":
        """Two levels at once with signs a (level n), then b, c on the left and right halves."""
        half = self.refine_with(a)
        second = np.column_stack((b, c)).ravel()
        return half.refine_with(second)

    def prune(self, keep: np.ndarray) -> "CellSet":
        return CellSet(
            depth=self.depth,
            cells=self.cells[keep],
            values=self.values[keep],
            slopes=self.slopes[keep],
        )
