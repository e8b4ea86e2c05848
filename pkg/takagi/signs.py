"""Sign sources for the generalized Takagi class.

A provider answers `sign(n, j)` for every level n >= 0 and cell 0 <= j < 2**n,
and `signs(n, cells)` for a whole vector of cells at one level. Providers are
frozen pydantic models; they hold no mutable state and can be shared between
worker threads.
"""

import logging
import re
from enum import IntEnum
from fractions import Fraction
from math import ceil
from typing import ClassVar, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_serializer, field_validator

from takagi.errors import ContractError, DomainError
from takagi.rationals import format_rational, parse_rational

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
UNIT_BITS = 53


class Sign(IntEnum):
    MINUS = -1
    PLUS = 1


def _splitmix(z: int) -> int:
    z = (z + _GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def _splitmix_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = z + np.uint64(_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def counter_hash(seed: int, n: int, j: int) -> int:
    """64-bit hash of the triple (seed, n, j); the basis of every seeded sign."""
    return _splitmix(_splitmix(_splitmix(seed & MASK64) ^ (n & MASK64)) ^ (j & MASK64))


def _low_words(cells: np.ndarray) -> np.ndarray:
    """Low 64 bits of each cell index; deep cell sets hold Python integers."""
    cells = np.asarray(cells)
    if cells.dtype == object:
        return np.fromiter((int(c) & MASK64 for c in cells), dtype=np.uint64, count=len(cells))
    return cells.astype(np.uint64)


def counter_hash_array(seed: int, n: int, cells: np.ndarray) -> np.ndarray:
    prefix = np.uint64(_splitmix(_splitmix(seed & MASK64) ^ (n & MASK64)))
    return _splitmix_array(prefix ^ _low_words(cells))


def bernoulli_threshold(p: Fraction) -> int:
    """Integer t with (h >> 11) < t  iff  (h >> 11) * 2**-53 < p."""
    return ceil(Fraction(p) * (1 << UNIT_BITS))


def _parity(cells: np.ndarray) -> np.ndarray:
    cells = np.asarray(cells)
    if cells.dtype == object:
        return np.fromiter((bin(int(c)).count("1") & 1 for c in cells), dtype=np.int64, count=len(cells))
    x = cells.astype(np.uint64)
    for shift in (32, 16, 8, 4, 2, 1):
        x = x ^ (x >> np.uint64(shift))
    return (x & np.uint64(1)).astype(np.int64)


def _from_bits(bits: np.ndarray) -> np.ndarray:
    return (1 - 2 * bits).astype(np.int8)


class SignProvider(BaseModel):
    """Total, deterministic source of signs w_{n,j} in {-1, +1}."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: ClassVar[str] = ""
    # True when sign(n, j) never depends on j
    level_constant: ClassVar[bool] = False

    def signs(self, n: int, cells: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def level(self, n: int) -> np.ndarray:
        return self.signs(n, np.arange(1 << n, dtype=np.int64))

    def sign(self, n: int, j: int) -> Sign:
        if n < 0 or not 0 <= j < (1 << n):
            raise DomainError(f"cell index j={j} outside [0, 2^{n})")
        cells = np.array([j], dtype=np.int64 if j < 1 << 62 else object)
        return Sign(int(self.signs(n, cells)[0]))

    def header(self) -> str:
        return self.kind

    def to_text(self) -> str:
        return self.header()


def sign_at(provider: SignProvider, n: int, j: int) -> Sign:
    return provider.sign(n, j)


class AllPlus(SignProvider):
    kind: ClassVar[str] = "all-plus"
    level_constant: ClassVar[bool] = True

    def signs(self, n: int, cells: np.ndarray) -> np.ndarray:
        return np.ones(len(cells), dtype=np.int8)


class Alternating(SignProvider):
    kind: ClassVar[str] = "alternating"
    level_constant: ClassVar[bool] = True

    def signs(self, n: int, cells: np.ndarray) -> np.ndarray:
        return np.full(len(cells), -1 if n % 2 else 1, dtype=np.int8)


class Rademacher(SignProvider):
    """w_{n,j} = (-1)^j; the Gray Takagi function."""

    kind: ClassVar[str] = "gray"

    def signs(self, n: int, cells: np.ndarray) -> np.ndarray:
        return _from_bits((_low_words(cells) & np.uint64(1)).astype(np.int64))


class RademacherProduct(SignProvider):
    """w_n = r_1 ... r_n, which on cell j is (-1)^popcount(j)."""

    kind: ClassVar[str] = "rademacher-product"

    def signs(self, n: int, cells: np.ndarray) -> np.ndarray:
        return _from_bits(_parity(cells))


class ConstantLevels(SignProvider):
    kind: ClassVar[str] = "constant-levels"
    level_constant: ClassVar[bool] = True

    levels: Tuple[int, ...]
    default: int = 1

    @field_validator("levels")
    @classmethod
    def _check_levels(cls, v):
        if any(s not in (-1, 1) for s in v):
            raise ContractError("levels: every sign must be +1 or -1")
        return tuple(v)

    def signs(self, n: int, cells: np.ndarray) -> np.ndarray:
        value = self.levels[n] if n < len(self.levels) else self.default
        return np.full(len(cells), value, dtype=np.int8)

    def header(self) -> str:
        return f"{self.kind} levels={_sign_chars(self.levels)} default={_sign_chars([self.default])}"


class _Seeded(SignProvider):
    seed: int
    p: Fraction = Fraction(1, 2)

    @field_validator("p", mode="before")
    @classmethod
    def _parse_p(cls, v):
        p = parse_rational(v, flag="p")
        if not 0 < p < 1:
            raise DomainError(f"p: {format_rational(p)} is outside (0, 1)")
        return p

    @field_serializer("p")
    def _dump_p(self, p: Fraction) -> str:
        return format_rational(p)

    def _threshold(self) -> np.uint64:
        return np.uint64(bernoulli_threshold(self.p))

    def header(self) -> str:
        return f"{self.kind} seed={self.seed} p={format_rational(self.p)}"


class SeededModel1(_Seeded):
    """One coin per level: w_n(x) = w_n for all x."""

    kind: ClassVar[str] = "model1"
    level_constant: ClassVar[bool] = True

    def level_sign(self, n: int) -> int:
        return 1 if (counter_hash(self.seed, n, 0) >> 11) < bernoulli_threshold(self.p) else -1

    def level_signs(self, levels: int) -> np.ndarray:
        """Signs w_0 .. w_{levels-1} as one vector (the walk increments)."""
        return model1_walk_steps([self.seed], levels, self.p)[0]

    def signs(self, n: int, cells: np.ndarray) -> np.ndarray:
        return np.full(len(cells), self.level_sign(n), dtype=np.int8)


class SeededModel2(_Seeded):
    """Independent coin per cell."""

    kind: ClassVar[str] = "model2"

    def signs(self, n: int, cells: np.ndarray) -> np.ndarray:
        draws = counter_hash_array(self.seed, n, cells) >> np.uint64(11)
        return np.where(draws < self._threshold(), 1, -1).astype(np.int8)


def model1_walk_steps(seeds: Sequence[int], levels: int, p: Fraction) -> np.ndarray:
    """Level signs of many Model-1 seeds at once, shape (len(seeds), levels).

    Row i equals SeededModel1(seed=seeds[i], p=p).level_sign(n) for n < levels.
    """
    threshold = np.uint64(bernoulli_threshold(p))
    base = _splitmix_array(np.asarray(seeds, dtype=np.uint64))
    out = np.empty((len(base), levels), dtype=np.int8)
    for n in range(levels):
        h = _splitmix_array(_splitmix_array(base ^ np.uint64(n)) ^ np.uint64(0))
        out[:, n] = np.where((h >> np.uint64(11)) < threshold, 1, -1)
    return out


class ExplicitTree(SignProvider):
    """Finite sign table to depth D; unset cells and deeper levels use `default`.

    `cells[n]` is a sorted index array for level n and `values[n]` the signs
    stored there.
    """

    kind: ClassVar[str] = "tree"

    cells: Tuple[np.ndarray, ...]
    values: Tuple[np.ndarray, ...]
    default: int = 1

    @property
    def depth(self) -> int:
        return len(self.cells)

    @classmethod
    def from_rows(cls, rows: Sequence[str], default: int = 1) -> "ExplicitTree":
        cells, values = [], []
        for n, row in enumerate(rows):
            if len(row) != 1 << n:
                raise ContractError(f"tree row {n} has {len(row)} signs, expected {1 << n}")
            if set(row) - {"+", "-"}:
                raise ContractError(f"tree row {n} contains characters other than + and -")
            raw = np.frombuffer(row.encode("ascii"), dtype=np.uint8)
            cells.append(np.arange(1 << n, dtype=np.int64))
            values.append(np.where(raw == ord("+"), 1, -1).astype(np.int8))
        return cls(cells=tuple(cells), values=tuple(values), default=default)

    @classmethod
    def from_overrides(
        cls,
        depth: int,
        overrides: Dict[int, Tuple[np.ndarray, np.ndarray]],
        default: int = 1,
    ) -> "ExplicitTree":
        cells, values = [], []
        for n in range(depth):
            idx, val = overrides.get(n, (np.empty(0, np.int64), np.empty(0, np.int8)))
            order = np.argsort(idx, kind="stable")
            cells.append(np.asarray(idx, dtype=np.int64)[order])
            values.append(np.asarray(val, dtype=np.int8)[order])
        return cls(cells=tuple(cells), values=tuple(values), default=default)

    def signs(self, n: int, cells: np.ndarray) -> np.ndarray:
        out = np.full(len(cells), self.default, dtype=np.int8)
        if n >= self.depth or len(self.cells[n]) == 0:
            return out
        cells = np.asarray(cells, dtype=np.int64)
        table = self.cells[n]
        pos = np.searchsorted(table, cells)
        pos_clipped = np.minimum(pos, len(table) - 1)
        hit = (pos < len(table)) & (table[pos_clipped] == cells)
        out[hit] = self.values[n][pos_clipped[hit]]
        return out

    def header(self) -> str:
        return f"{self.kind} default={_sign_chars([self.default])}"

    def to_text(self) -> str:
        rows = [_sign_chars(self.level(n)) for n in range(self.depth)]
        return "\n".join([self.header()] + rows)


class Negated(SignProvider):
    kind: ClassVar[str] = "negate"

    base: SignProvider

    @property
    def level_constant(self) -> bool:  # type: ignore[override]
        return self.base.level_constant

    def signs(self, n: int, cells: np.ndarray) -> np.ndarray:
        return (-self.base.signs(n, cells)).astype(np.int8)

    def to_text(self) -> str:
        return f"{self.kind}\n{self.base.to_text()}"


class LineShift(SignProvider):
    """Levels below m carry `prefix`; level m+n, cell j reads base (n, j mod 2^n).

    This is the sign sequence of -sum_{k<m} 2^-k phi(2^k x) + 2^-m f(2^m x)
    (prefix -1) or its mirror with +sum (prefix +1).
    """

    kind: ClassVar[str] = "line"

    base: SignProvider
    m: int
    prefix: int = -1

    @property
    def level_constant(self) -> bool:  # type: ignore[override]
        return self.base.level_constant

    def signs(self, n: int, cells: np.ndarray) -> np.ndarray:
        if n < self.m:
            return np.full(len(cells), self.prefix, dtype=np.int8)
        inner = n - self.m
        return self.base.signs(inner, np.asarray(cells) & ((1 << inner) - 1))

    def to_text(self) -> str:
        return f"{self.kind} m={self.m} prefix={_sign_chars([self.prefix])}\n{self.base.to_text()}"


PROVIDER_KINDS = (
    "all-plus",
    "takagi",
    "alternating",
    "gray",
    "rademacher",
    "rademacher-product",
    "constant-levels",
    "model1",
    "model2",
    "tree",
    "negate",
    "line",
)


def _sign_chars(signs: Sequence[int]) -> str:
    return "".join("+" if int(s) > 0 else "-" for s in signs)


def _parse_sign_chars(text: str, flag: str) -> List[int]:
    if not text or set(text) - {"+", "-"}:
        raise ContractError(f"{flag}: expected a string of + and - characters, got {text!r}")
    return [1 if c == "+" else -1 for c in text]


def _params(tokens: List[str], kind: str) -> Dict[str, str]:
    params = {}
    for token in tokens:
        if "=" not in token:
            raise ContractError(f"provider {kind}: parameter {token!r} is not key=value")
        key, value = token.split("=", 1)
        params[key.strip()] = value.strip()
    return params


def parse_provider(text: str) -> SignProvider:
    """Parse the one-line-header provider format (`;` may stand for a newline)."""
    lines = [line.strip() for line in re.split(r"[\n;]", text)]
    lines = [line for line in lines if line and not line.startswith("#")]
    if not lines:
        raise ContractError("function: empty provider text")
    return _parse_lines(lines)


def _parse_lines(lines: List[str]) -> SignProvider:
    tokens = lines[0].split()
    kind, params = tokens[0].lower(), _params(tokens[1:], tokens[0])
    rest = lines[1:]
    try:
        if kind in ("all-plus", "takagi"):
            return AllPlus()
        if kind == "alternating":
            return Alternating()
        if kind in ("gray", "rademacher"):
            return Rademacher()
        if kind == "rademacher-product":
            return RademacherProduct()
        if kind == "constant-levels":
            levels = _parse_sign_chars(params.get("levels", ""), "levels")
            default = _parse_sign_chars(params.get("default", "+"), "default")[0]
            return ConstantLevels(levels=tuple(levels), default=default)
        if kind in ("model1", "model2"):
            if "seed" not in params:
                raise ContractError(f"provider {kind}: missing seed=")
            cls = SeededModel1 if kind == "model1" else SeededModel2
            return cls(seed=int(params["seed"]), p=params.get("p", "1/2"))
        if kind == "tree":
            default = _parse_sign_chars(params.get("default", "+"), "default")[0]
            return ExplicitTree.from_rows(rest, default=default)
        if kind == "negate":
            return Negated(base=_parse_lines(rest))
        if kind == "line":
            prefix = _parse_sign_chars(params.get("prefix", "-"), "prefix")[0]
            return LineShift(base=_parse_lines(rest), m=int(params.get("m", "0")), prefix=prefix)
    except IndexError:
        raise ContractError(f"provider {kind}: missing base provider lines")
    except ValueError as e:
        raise ContractError(f"provider {kind}: {e}") from e
    raise ContractError(f"function: unknown provider kind {kind!r} (known: {', '.join(PROVIDER_KINDS)})")
