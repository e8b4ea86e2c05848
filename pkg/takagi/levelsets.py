"""Strip counts, level-set covers, shape detectors and box-dimension fits.

Covers are traced on sparse cell sets. A cell is dropped as soon as its closed
envelope [f_n - 2**-n, f_n + 2**-n] misses the target, and child envelopes lie
inside their parent's, so the survivors at depth n are exactly the cells a
dense depth-n test would keep.
"""

import logging
from fractions import Fraction
from math import floor
from typing import Callable, Iterator, List, NamedTuple, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import stats

from takagi.errors import ContractError, EmptyLevelSetError, IdentityError
from takagi.piecewise import CellSet, DyadicValue, GridFunction, build, refine
from takagi.schema import CoverReport
from takagi.signs import SignProvider
from takagi import spectra

logger = logging.getLogger(__name__)

# fits drop this many shallow depths before regressing
FIT_SKIP = 4
# past this magnitude scaled comparisons switch to Python integers
_INT64_SAFE = 1 << 62


class StripCounts(BaseModel):
    n: int
    k: int
    n0: int
    n1: int


class TripleState(BaseModel):
    """(c_n, l_n, u_n) at stage n for the strip index k_n chosen for y."""

    model_config = ConfigDict(frozen=True)

    n: int
    k: int
    c: int
    l: int
    u: int

    @property
    def sigma(self) -> int:
        return self.l + self.u

    @property
    def m(self) -> int:
        return max(self.l, self.u)

    def vector(self) -> List[int]:
        return [self.c, self.sigma, self.m]


class MaxCounts(NamedTuple):
    m0: int
    m1: int
    bound: int


class ShapeCounts(NamedTuple):
    z_count: int
    cup_count: int


def _require_even(gf: GridFunction) -> None:
    if gf.depth % 2:
        raise ContractError(f"depth: strip counting needs an even depth, got {gf.depth}")


def strip_counts(gf: GridFunction, k: int) -> StripCounts:
    """N0 and N1 of strip J_{n,k} = [2k, 2k+2] / 4**n at depth 2n."""
    _require_even(gf)
    left, right, s = gf.values[:-1], gf.values[1:], gf.slopes
    low, high = np.minimum(left, right), np.maximum(left, right)
    flat = s == 0
    n0 = int(np.count_nonzero(flat & (left == 2 * k)))
    on_edge = flat & ((left == 2 * k) | (left == 2 * k + 2))
    n1 = int(np.count_nonzero((low < 2 * k + 2) & (high > 2 * k) & ~on_edge))
    return StripCounts(n=gf.depth // 2, k=k, n0=n0, n1=n1)


def max_counts(gf: GridFunction) -> MaxCounts:
    """M0 and M1 over every strip, plus the cover bound 2*M0 + 3*M1."""
    _require_even(gf)
    left, right, s = gf.values[:-1], gf.values[1:], gf.slopes
    low, high = np.minimum(left, right), np.maximum(left, right)
    base = int(low.min()) // 2
    flat = s == 0
    m0 = int(np.bincount(left[flat] // 2 - base).max()) if flat.any() else 0
    m1 = 0
    if (~flat).any():
        # a sloped cell meets the open strips k = low/2 .. high/2 - 1
        span = int(high.max()) // 2 - base + 1
        diff = np.zeros(span + 1, dtype=np.int64)
        np.add.at(diff, low[~flat] // 2 - base, 1)
        np.add.at(diff, high[~flat] // 2 - base, -1)
        m1 = int(np.cumsum(diff).max())
    return MaxCounts(m0=m0, m1=m1, bound=2 * m0 + 3 * m1)


def _line_mask(cs: CellSet, slope: int, intercept: Fraction) -> np.ndarray:
    """Cells whose closed envelope meets y = slope * x + intercept."""
    p, q = intercept.numerator, intercept.denominator
    scale = 1 << cs.depth
    magnitude = q * scale * (abs(slope) + abs(p) + 4)
    dtype = object if magnitude >= _INT64_SAFE else np.int64
    cells = cs.cells.astype(dtype)
    left = q * (cs.values.astype(dtype) - slope * cells) - p * scale
    right = q * (cs.right.astype(dtype) - slope * (cells + 1)) - p * scale
    low, high = np.minimum(left, right), np.maximum(left, right)
    return ((low <= q) & (high >= -q)).astype(bool)


def _coerce_level(y: Union[Fraction, DyadicValue, int]) -> Fraction:
    return y.to_fraction() if isinstance(y, DyadicValue) else Fraction(y)


def trace_cover(
    provider: SignProvider,
    keep: Callable[[CellSet], np.ndarray],
    depth: int,
) -> Iterator[CellSet]:
    """Survivors at depths 0..depth; `keep` decides which cells of a level stay."""
    cs = CellSet.root()
    for d in range(depth + 1):
        cs = cs.prune(keep(cs))
        logger.debug("depth %d: %d cells", d, len(cs))
        yield cs
        if d < depth:
            cs = cs.refine(provider)


def iter_line_cover(
    provider: SignProvider, slope: int, intercept: Union[Fraction, int], depth: int
) -> Iterator[CellSet]:
    b = _coerce_level(intercept)
    return trace_cover(provider, lambda cs: _line_mask(cs, slope, b), depth)


def _max_mask(cs: CellSet) -> np.ndarray:
    if len(cs) == 0:
        return np.zeros(0, dtype=bool)
    top = np.maximum(cs.values, cs.right)
    return top >= top.max() - 1


def iter_max_cover(provider: SignProvider, depth: int) -> Iterator[CellSet]:
    return trace_cover(provider, _max_mask, depth)


def _report(target: str, cellsets: Iterator[CellSet], min_depth: int) -> CoverReport:
    depths, counts = [], []
    for cs in cellsets:
        if cs.depth >= min_depth:
            depths.append(cs.depth)
            counts.append(len(cs))
    return CoverReport(target=target, depths=depths, counts=counts)


def cover_line(
    provider: SignProvider,
    slope: int,
    intercept: Union[Fraction, int],
    depth: int,
    min_depth: int = 1,
) -> CoverReport:
    """Cells covering graph(f) on the line y = slope * x + intercept, per depth."""
    b = _coerce_level(intercept)
    target = f"line m={slope} b={b}"
    return _report(target, iter_line_cover(provider, slope, b, depth), min_depth)


def cover_level(
    provider: SignProvider,
    y: Union[Fraction, DyadicValue, int],
    depth: int,
    min_depth: int = 1,
) -> CoverReport:
    y = _coerce_level(y)
    return _report(f"level y={y}", iter_line_cover(provider, 0, y, depth), min_depth)


def max_set_cover(provider: SignProvider, depth: int, min_depth: int = 1) -> CoverReport:
    """Cells that may hold a maximizer: cell max + 2**-n > (best cell max) - 2**-n."""
    return _report("max", iter_max_cover(provider, depth), min_depth)


def strip_index(y: Fraction, n: int) -> int:
    """k_n: the J_{n,j} containing y, moved up by one when y is in its upper half."""
    return floor((Fraction(y) * 4**n + 1) / 2)


def triple_state(gf: GridFunction, y: Fraction) -> TripleState:
    _require_even(gf)
    n = gf.depth // 2
    k = strip_index(y, n)
    upper = strip_counts(gf, k)
    lower = strip_counts(gf, k - 1)
    return TripleState(n=n, k=k, c=upper.n0, l=lower.n1, u=upper.n1)


def triple_step(state: TripleState, gf: GridFunction, y: Fraction) -> TripleState:
    """Advance (c, l, u) from stage n to n+1 given f at depth 2(n+1)."""
    if gf.depth != 2 * (state.n + 1):
        raise ContractError(f"depth: expected {2 * (state.n + 1)}, got {gf.depth}")
    nxt = triple_state(gf, y)
    if abs(nxt.k - 4 * state.k) > 2:
        raise IdentityError(f"k jumped from {state.k} to {nxt.k} at stage {nxt.n}")
    return nxt


def iter_triples(provider: SignProvider, y: Fraction, stages: int) -> Iterator[TripleState]:
    gf = build(provider, 0)
    state = triple_state(gf, y)
    yield state
    for _ in range(stages):
        gf = refine(refine(gf, provider), provider)
        state = triple_step(state, gf, y)
        yield state


def dominated_by_e_or_f(before: TripleState, after: TripleState) -> bool:
    """x_{n+1} <= E x_n or x_{n+1} <= F x_n componentwise."""
    x, nxt = before.vector(), after.vector()
    return any(
        all(a <= b for a, b in zip(nxt, matrix.apply(x)))
        for matrix in (spectra.E, spectra.F)
    )


def zero_mask(cs: CellSet) -> np.ndarray:
    """Cells on which f_n itself vanishes (closed segments)."""
    low = np.minimum(cs.values, cs.right)
    high = np.maximum(cs.values, cs.right)
    return (low <= 0) & (high >= 0)


def shape_counts(gamma: CellSet) -> ShapeCounts:
    """Z and cup shapes among consecutive cells of a zero-cell set."""
    if len(gamma) < 3:
        return ShapeCounts(0, 0)
    c, s = gamma.cells, gamma.slopes
    run = (c[1:-1] == c[:-2] + 1) & (c[2:] == c[1:-1] + 1) & (s[1:-1] == 0)
    z = run & (((s[:-2] == 2) & (s[2:] == 2)) | ((s[:-2] == -2) & (s[2:] == -2)))
    cup = run & (s[:-2] == -2) & (s[2:] == 2)
    return ShapeCounts(int(np.count_nonzero(z)), int(np.count_nonzero(cup)))


def detect_shapes(gf: GridFunction) -> ShapeCounts:
    _require_even(gf)
    full = CellSet.from_grid(gf)
    return shape_counts(full.prune(zero_mask(full)))


def _select(report: CoverReport, parity: Optional[int]):
    pairs = list(zip(report.depths, report.counts))
    if parity is not None:
        pairs = [(d, c) for d, c in pairs if d % 2 == parity]
    return pairs


def _fit(report: CoverReport, method: str, skip: int, period: int, parity: Optional[int]):
    pairs = _select(report, parity)
    empty = [d for d, c in pairs if c == 0]
    if empty:
        raise EmptyLevelSetError(f"{report.target or 'cover'} is empty at depth {empty[0]}")
    if len(pairs) < 2:
        raise ContractError(f"fit needs at least 2 depths, got {len(pairs)}")
    counts = [c for _, c in pairs]
    if any(b < a for a, b in zip(counts, counts[1:])):
        logger.warning("non-monotone cover counts for %s: %s", report.target, counts)
    if method == "ratio":
        if len(pairs) <= period:
            raise ContractError(f"ratio fit needs more than {period} depths")

        def ratio_at(i):
            (d0, c0), (d1, c1) = pairs[i - period], pairs[i]
            return float(np.log2(c1 / c0)) / (d1 - d0)

        estimate = ratio_at(len(pairs) - 1)
        previous = ratio_at(len(pairs) - 2) if len(pairs) > period + 1 else estimate
        return estimate, abs(estimate - previous)
    if method != "lsq":
        raise ContractError(f"method: unknown fit method {method!r} (use lsq or ratio)")
    if len(pairs) < 4:
        raise ContractError(f"least-squares fit needs at least 4 depths, got {len(pairs)}")
    pairs = pairs[min(skip, len(pairs) - 4):]
    depths = np.array([d for d, _ in pairs], dtype=float)
    logs = np.log2(np.array([c for _, c in pairs], dtype=float))
    fit = stats.linregress(depths, logs)
    residual = float(np.sqrt(np.mean((logs - (fit.intercept + fit.slope * depths)) ** 2)))
    return float(fit.slope), residual


def fit_dimension(
    report: CoverReport,
    method: str = "lsq",
    skip: int = FIT_SKIP,
    period: int = 1,
    parity: Optional[int] = None,
) -> float:
    """Box dimension from a cover report: slope of log2(count) against binary depth.

    `ratio` uses only the last `period` steps, which is what exact self-similar
    counts want; `lsq` regresses after dropping `skip` shallow depths. `parity`
    restricts the fit to even (0) or odd (1) depths.
    """
    return _fit(report, method, skip, period, parity)[0]


def with_fit(
    report: CoverReport,
    method: str = "lsq",
    skip: int = FIT_SKIP,
    period: int = 1,
    parity: Optional[int] = None,
) -> CoverReport:
    dimension, residual = _fit(report, method, skip, period, parity)
    return report.model_copy(
        update={"fitted_dimension": dimension, "residual": residual, "method": method}
    )
