"""Explicit constructions: extremal level sets, Gray Takagi special sets, line reductions."""

import itertools
import logging
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from takagi.errors import ContractError, DomainError, IdentityError
from takagi.levelsets import MaxCounts, fit_dimension, iter_line_cover, max_counts, strip_counts
from takagi.piecewise import CellSet, build, partial_sum, refine
from takagi.schema import CoverReport
from takagi.signs import ConstantLevels, ExplicitTree, LineShift, Negated, Rademacher, SignProvider

logger = logging.getLogger(__name__)

TAKAGI_MAX = Fraction(2, 3)
EXTREMAL_LEVEL = Fraction(8, 17)
GRAY_LEVEL = Fraction(2, 5)
GRAY_ZERO = Fraction(11, 15)

EXTREMAL_STAGE_CAP = 13


class Baseline(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    y: Fraction

    @property
    def scaled(self) -> int:
        """y_n * 4**n, always an integer."""
        return int(self.y * 4**self.n)


class TypedCellSet(BaseModel):
    """Cells I_{2n,j} of K_n with their type (1 flat, 2 or 3 sloped)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n: int
    cells: np.ndarray
    types: np.ndarray

    def type_counts(self) -> List[int]:
        return [int(np.count_nonzero(self.types == t)) for t in (1, 2, 3)]


class ExtremalConstruction(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    provider: ExplicitTree
    baselines: List[Baseline]
    cells: List[TypedCellSet]

    def counts(self) -> List[int]:
        return [len(stage.cells) for stage in self.cells]

    def report(self) -> CoverReport:
        return CoverReport(
            target=f"extremal level y={EXTREMAL_LEVEL}",
            depths=[2 * stage.n for stage in self.cells],
            counts=self.counts(),
        )


def _baseline_step(n: int) -> int:
    """Y_{n+1} - 4 Y_n for the scaled baseline: up, hold, down, hold."""
    return {0: 2, 1: 0, 2: -2, 3: 0}[n % 4]


def _case_signs(n: int, k: CellSet, baseline: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Signs (w_{2n}, w_{2n+1} left, w_{2n+1} right) for every cell of K_n."""
    s = k.slopes
    flat, up, down = s == 0, s == 2, s == -2
    a, b, c = (np.ones(len(k), dtype=np.int64) for _ in range(3))
    r = n % 4

    def put(mask, signs):
        a[mask], b[mask], c[mask] = signs

    if r == 0:
        put(flat, (1, 1, 1))
        put(up, (-1, 1, -1))
        put(down, (-1, -1, 1))
    elif r == 2:
        put(flat, (-1, -1, -1))
        put(up, (1, -1, 1))
        put(down, (1, 1, -1))
    else:
        put(flat, (-1, 1, 1) if r == 1 else (1, -1, -1))
        below = (k.values <= baseline) & (k.right <= baseline)
        put(~flat & below, (1, 1, 1))
        put(~flat & ~below, (-1, -1, -1))
    return a, b, c


def _classify(n: int, k: CellSet, baseline: int) -> np.ndarray:
    """Type of each cell of K_n; raises when a cell leaves the {-2, 0, 2} pattern."""
    s = k.slopes
    if np.any(np.abs(s) > 2) or np.any(s % 2):
        raise IdentityError(f"stage {n}: slope outside {{-2, 0, 2}} in K_n")
    flat = s == 0
    if np.any(k.values[flat] != baseline):
        raise IdentityError(f"stage {n}: flat cell off the baseline")
    on_left, on_right = k.values == baseline, k.right == baseline
    if np.any(~flat & ~(on_left ^ on_right)):
        raise IdentityError(f"stage {n}: sloped cell does not touch the baseline at exactly one endpoint")
    above = np.maximum(k.values, k.right) > baseline
    # direction of y_{n+2} - y_n: up for n = 0, 3 mod 4, down for n = 1, 2
    rising = n % 4 in (0, 3)
    types = np.where(above == rising, 2, 3)
    types[flat] = 1
    return types


def extremal_flexible(depth: int) -> ExtremalConstruction:
    """Stages 0..depth of the extremal set K with its baselines and sign tree."""
    if not 0 <= depth <= EXTREMAL_STAGE_CAP:
        raise DomainError(f"depth: extremal construction runs 0..{EXTREMAL_STAGE_CAP} stages, got {depth}")
    k = CellSet.root()
    baseline = 0
    overrides: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
    baselines = [Baseline(n=0, y=Fraction(0))]
    stages = [TypedCellSet(n=0, cells=k.cells, types=_classify(0, k, baseline))]
    for n in range(depth):
        a, b, c = _case_signs(n, k, baseline)
        overrides[2 * n] = (k.cells, a)
        children = np.column_stack((2 * k.cells, 2 * k.cells + 1)).ravel()
        overrides[2 * n + 1] = (children, np.column_stack((b, c)).ravel())
        refined = k.refine_pair(a, b, c)
        baseline = 4 * baseline + _baseline_step(n)
        low = np.minimum(refined.values, refined.right)
        high = np.maximum(refined.values, refined.right)
        k = refined.prune((low <= baseline) & (high >= baseline))
        baselines.append(Baseline(n=n + 1, y=Fraction(baseline, 4 ** (n + 1))))
        stages.append(TypedCellSet(n=n + 1, cells=k.cells, types=_classify(n + 1, k, baseline)))
        logger.debug("stage %d: %d cells, types %s", n + 1, len(k), stages[-1].type_counts())
    provider = ExplicitTree.from_overrides(2 * depth, overrides, default=1)
    return ExtremalConstruction(provider=provider, baselines=baselines, cells=stages)


def extremal_dimension(construction: ExtremalConstruction, first_stage: int = 8) -> float:
    """log(alpha) / log 16 from exact count ratios over two stages."""
    report = construction.report()
    tail = CoverReport(
        target=report.target,
        depths=[d for d in report.depths if d >= 2 * first_stage],
        counts=[c for d, c in zip(report.depths, report.counts) if d >= 2 * first_stage],
    )
    return fit_dimension(tail, method="ratio", period=2)


def rigid_extremal_level(levels: Sequence[int]) -> Tuple[Fraction, List[int]]:
    """Level y with N0_{n,k_n} = 2**n along the path k_{n+1} = 4 k_n + (w_2n + w_2n+1) / 2."""
    if len(levels) % 2:
        raise ContractError(f"levels: need an even number of signs, got {len(levels)}")
    path = [0]
    for n in range(len(levels) // 2):
        path.append(4 * path[-1] + (levels[2 * n] + levels[2 * n + 1]) // 2)
    stages = len(path) - 1
    y = Fraction(2 * path[-1], 4**stages)
    return y, path


def check_count_recursions(stages_max: List[MaxCounts], gray: bool = False) -> None:
    """Stage-to-stage recursions for (M0, M1); raises IdentityError on a violation."""
    for n, (before, after) in enumerate(zip(stages_max, stages_max[1:])):
        if gray:
            ok = 2 * after.m0 <= 2 * before.m0 + before.m1 and after.m1 <= 2 * before.m0 + before.m1
        else:
            ok = after.m0 <= max(2 * before.m0, before.m1) and after.m1 <= 2 * before.m0 + before.m1
        if not ok:
            raise IdentityError(f"count recursion fails from stage {n} to {n + 1}: {before} -> {after}")


def constant_level_bounds(levels: Sequence[int]) -> List[MaxCounts]:
    """(M0, M1) per stage for one T_c prefix, with the closed bounds and the extremal path checked."""
    provider = ConstantLevels(levels=tuple(levels))
    _, path = rigid_extremal_level(levels)
    gf = build(provider, 0)
    out = [max_counts(gf)]
    for n in range(1, len(levels) // 2 + 1):
        gf = refine(refine(gf, provider), provider)
        counts = max_counts(gf)
        if counts.m0 > 2**n or counts.m1 > 2 * (2**n - 1):
            raise IdentityError(f"stage {n}: {counts} exceeds (2^n, 2(2^n - 1)) for {levels}")
        if strip_counts(gf, path[n]).n0 != 2**n:
            raise IdentityError(f"stage {n}: N0 at k_n={path[n]} is not 2^{n} for {levels}")
        out.append(counts)
    check_count_recursions(out)
    return out


def exhaustive_constant_level_check(stages: int = 5) -> int:
    """Run constant_level_bounds over every sign prefix of length 2 * stages."""
    checked = 0
    for levels in itertools.product((1, -1), repeat=2 * stages):
        constant_level_bounds(levels)
        checked += 1
    logger.info("checked %d constant-level prefixes", checked)
    return checked


def gray_count_bounds(stages: int) -> List[MaxCounts]:
    """Gray Takagi (M0, M1) with M0 <= 2**(n-1) and M1 <= 2**n for n >= 1."""
    provider = Rademacher()
    gf = build(provider, 0)
    out = [max_counts(gf)]
    for n in range(1, stages + 1):
        gf = refine(refine(gf, provider), provider)
        counts = max_counts(gf)
        if counts.m0 > 2 ** (n - 1) or counts.m1 > 2**n:
            raise IdentityError(f"stage {n}: Gray counts {counts} exceed (2^(n-1), 2^n)")
        out.append(counts)
    check_count_recursions(out, gray=True)
    return out


class GrayZeroPoints(BaseModel):
    x_list: List[Fraction]
    x_star: Fraction
    worst_residual: Fraction


def gray_zero_points(m_max: int, depth: int = 24, samples: int = 8) -> GrayZeroPoints:
    """x_m = 1 - sum_{i<=m} 4**-(2i-1), their limit 11/15, and the self-similarity check.

    On [x_m, x_{m-1}], f(x) = -4**-(2m-1) f(4**(2m-1) (x_{m-1} - x)); with partial
    sums of depth d the residual must stay within 2**-d (1 + 4**-(2m-1)).
    """
    if m_max < 1:
        raise DomainError(f"m-max: must be at least 1, got {m_max}")
    provider = Rademacher()
    xs = [Fraction(1)]
    for m in range(1, m_max + 1):
        xs.append(xs[-1] - Fraction(1, 4 ** (2 * m - 1)))
    x_star = 1 - Fraction(1, 4) / (1 - Fraction(1, 16))
    worst = Fraction(0)
    for m in range(1, m_max + 1):
        scale = Fraction(1, 4 ** (2 * m - 1))
        slack = Fraction(1, 2**depth) * (1 + scale)
        for i in range(samples + 1):
            u = Fraction(samples - i, samples)
            x = xs[m] + i * (xs[m - 1] - xs[m]) / samples
            residual = abs(partial_sum(provider, x, depth) + scale * partial_sum(provider, u, depth))
            if residual > slack:
                raise IdentityError(f"self-similarity fails at x={x} (m={m}): residual {residual}")
            worst = max(worst, residual / slack)
    return GrayZeroPoints(x_list=xs[1:], x_star=x_star, worst_residual=worst)


class GrayLevelCopies(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    baselines: List[Fraction]
    copies: List[int]
    cells: List[np.ndarray]

    def report(self) -> CoverReport:
        return CoverReport(
            target=f"gray level y={GRAY_LEVEL}",
            depths=[2 * (n + 1) for n in range(len(self.cells))],
            counts=[len(c) for c in self.cells],
        )


def _find_copies(cs: CellSet, first_slope: int, second_slope: int, baseline: int) -> np.ndarray:
    """Left cells of consecutive pairs with the given slopes whose flat part sits on the baseline."""
    c, s, v = cs.cells, cs.slopes, cs.values
    pair = (c[1:] == c[:-1] + 1) & (s[:-1] == first_slope) & (s[1:] == second_slope)
    flat_value = v[:-1] if first_slope == 0 else v[1:]
    return np.nonzero(pair & (flat_value == baseline))[0]


def gray_level_two_fifths(depth: int) -> GrayLevelCopies:
    """Copies of a two-segment piece converging onto the level 2/5 of the Gray Takagi function.

    Stage n (cells at depth 2n) holds 2**(n-1) copies; their flat parts sit at
    y_n = (1/2) sum_{i<n} (-1/4)**i.
    """
    if depth < 1:
        raise DomainError(f"depth: must be at least 1, got {depth}")
    provider = Rademacher()
    gf = build(provider, 2)
    copies = CellSet.from_grid(gf, np.array([True, True, False, False]))
    baselines, counts, cells = [Fraction(1, 2)], [1], [copies.cells]
    for n in range(1, depth):
        refined = copies.refine(provider).refine(provider)
        y_next = baselines[-1] + Fraction(1, 2) * Fraction(-1, 4) ** n
        scaled = int(y_next * 4 ** (n + 1))
        pattern = (0, 2) if n % 2 else (2, 0)
        lefts = _find_copies(refined, pattern[0], pattern[1], scaled)
        if len(lefts) != 2 * counts[-1]:
            raise IdentityError(f"stage {n + 1}: found {len(lefts)} copies, expected {2 * counts[-1]}")
        keep = np.zeros(len(refined), dtype=bool)
        keep[lefts] = True
        keep[lefts + 1] = True
        copies = refined.prune(keep)
        baselines.append(y_next)
        counts.append(len(lefts))
        cells.append(copies.cells)
    return GrayLevelCopies(baselines=baselines, copies=counts, cells=cells)


def slope_interval(provider: SignProvider, m: int) -> Tuple[int, int]:
    """The unique cell (|m|, j) on which f_{|m|} has slope m."""
    depth = abs(m)
    j = 0
    step = 1 if m > 0 else -1
    for n in range(depth):
        w = int(provider.sign(n, j))
        # children slopes: left s + w, right s - w
        j = 2 * j + (0 if w == step else 1)
    if depth <= 12:
        hits = np.nonzero(build(provider, depth).slopes == m)[0]
        if hits.tolist() != [j]:
            raise IdentityError(f"slope {m} found on cells {hits.tolist()}, expected only {j}")
    return depth, j


def line_reduction(provider: SignProvider, m: int, b: Fraction) -> Tuple[SignProvider, Fraction]:
    """Provider of g and level b / 2**m with L_g(b / 2**m) on [0, 2**-m] the image of graph(f) on y = m x + b."""
    b = Fraction(b)
    if m < 0:
        provider, m, b = Negated(base=provider), -m, -b
    if m == 0:
        return provider, b
    return LineShift(base=provider, m=m, prefix=-1), b / 2**m


def extremal_line_function(m: int, stages: int) -> Tuple[SignProvider, Fraction, CoverReport]:
    """g = sum_{k<m} 2**-k tent(2**k x) + 2**-m h(2**m x) with h extremal, and its line cover.

    The slope-m line y = m x + 2**-m (8/17) meets graph(g) in an affine copy of
    the extremal set, so the cover at depth m + 2n holds at least |K_n| cells.
    """
    if m < 0:
        raise DomainError(f"slope: expected m >= 0, got {m}")
    construction = extremal_flexible(stages)
    g = LineShift(base=construction.provider, m=m, prefix=1)
    intercept = EXTREMAL_LEVEL / 2**m
    depths, counts = [], []
    for cs in iter_line_cover(g, m, intercept, m + 2 * stages):
        if cs.depth >= m and (cs.depth - m) % 2 == 0:
            depths.append(cs.depth)
            counts.append(len(cs))
    report = CoverReport(target=f"line m={m} b={intercept}", depths=depths, counts=counts)
    return g, intercept, report


def check_gray_functional_equation(depth: int) -> None:
    """f(x) = x + f(2x)/2 on [0, 1/2] and f(x) = 1 - x - f(2 - 2x)/2 on [1/2, 1], on the grid of f_depth."""
    if depth < 1:
        raise DomainError(f"depth: must be at least 1, got {depth}")
    provider = Rademacher()
    coarse = build(provider, depth - 1)
    fine = refine(coarse, provider)
    half = 1 << (depth - 1)
    j = np.arange(fine.cells + 1)
    left = j[: half + 1]
    right = j[half:]
    expected = np.concatenate((left + coarse.values[left], (2 * half - right) - coarse.values[2 * half - right]))
    actual = np.concatenate((fine.values[: half + 1], fine.values[half:]))
    bad = np.nonzero(actual != expected)[0]
    if len(bad):
        raise IdentityError(f"gray functional equation fails at {len(bad)} grid points, first at index {int(bad[0])}")
