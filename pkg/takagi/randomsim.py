"""Seeded Monte Carlo for the random sign models.

Model 1 draws one sign per level, Model 2 one sign per cell. Every trial is a
pure function of (model, seed, p, depth), so batches can run on worker threads
in any order and the folded result is sorted by seed before it is reduced.
"""

import asyncio
import logging
import math
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from takagi import spectra
from takagi.errors import ContractError, DomainError, IdentityError, InconclusiveError, TakagiError
from takagi.levelsets import cover_level, fit_dimension, iter_max_cover, shape_counts, zero_mask
from takagi.piecewise import CellSet
from takagi.rationals import format_rational, parse_rational
from takagi.schema import CoverReport, Estimate, SelfTestReport, TrialRecord
from takagi.signs import ConstantLevels, SeededModel1, SeededModel2, SignProvider, model1_walk_steps

logger = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 256
MIN_REPORTED_TRIALS = 30
PGF_POINTS = (0.5, 0.7, 0.786151)
COFINITE_TAIL = 4

BatchTrial = Callable[[Sequence[int]], List[TrialRecord]]


# reference values


def gw_offspring_law(p: Fraction) -> Tuple[float, float, float]:
    """Children of a flat cell at the running maximum: 0, 1 or 2."""
    p = float(p)
    q = 1.0 - p
    return 1.0 - 2 * p * p * q - p**3, 2 * p * p * q, p**3


def gw_extinction_probability(p: Fraction) -> float:
    """Smallest fixed point of the offspring pgf in [0, 1]."""
    pi0, _, pi2 = gw_offspring_law(p)
    return min(1.0, pi0 / pi2)


def gw_extinction_by(p: Fraction, generations: int) -> float:
    """P(the process is extinct by the given generation): the pgf iterated from 0."""
    pi0, pi1, pi2 = gw_offspring_law(p)
    t = 0.0
    for _ in range(generations):
        t = pi0 + pi1 * t + pi2 * t * t
    return t


def gw_survival_probability(p: Fraction) -> float:
    p = float(p)
    return max((2 * p * p - 1) / p**3, 0.0)


def gw_max_dimension(p: Fraction) -> float:
    p = float(p)
    if 2 * p * p <= 1:
        raise DomainError(f"p: the maximum-set dimension needs p > 1/sqrt(2), got {p}")
    return math.log(2 * p * p) / math.log(4)


def model1_max_dimension(p: Fraction) -> float:
    p = float(p)
    return max(1.0 - 1.0 / (2 * p), 0.0)


def z_growth_lower_rate(p: Fraction = Fraction(1, 2)) -> float:
    p = float(p)
    return p * (1 - p) * math.log(3) / 2


def zero_dimension_lower_bound(p: Fraction = Fraction(1, 2)) -> float:
    return z_growth_lower_rate(p) / math.log(4)


def pattern_free_probability(p: Fraction, depth: int) -> float:
    """P(the walk shows no -1, 0, 1 run at times 2n-1, 2n, 2n+1 <= depth), exactly in floats.

    For p < 1/2 the mirrored run is used, which is the same number at 1 - p.
    """
    p = float(p)
    if p < 0.5:
        p = 1.0 - p
    q = 1.0 - p
    offset = depth + 1
    dist = np.zeros(2 * depth + 3)
    dist[offset] = 1.0
    armed = 0.0
    for _ in range(depth):
        nxt = np.zeros_like(dist)
        nxt[1:] += p * dist[:-1]
        nxt[:-1] += q * dist[1:]
        moved = p * dist[offset - 1]
        nxt[offset] -= moved
        nxt[offset - 1] += q * armed
        # an armed walk stepping up completes the run and leaves the table
        dist, armed = nxt, moved
    return float(dist.sum() + armed)


# shared helpers


def summarize(values: Sequence[float], target: Optional[float] = None, label: str = "") -> Estimate:
    """Sample mean with std error sd / sqrt(n)."""
    if len(values) == 0:
        raise InconclusiveError(f"{label or 'estimator'}: no qualifying trials")
    data = np.asarray(values, dtype=float)
    if len(data) < MIN_REPORTED_TRIALS:
        logger.warning("%s: only %d trials behind this estimate", label or "estimator", len(data))
    std_error = float(data.std(ddof=1) / math.sqrt(len(data))) if len(data) > 1 else 0.0
    return Estimate(mean=float(data.mean()), std_error=std_error, trials=len(data), target=target)


def provider_for(model: int, seed: int, p: Fraction) -> SignProvider:
    if model == 1:
        return SeededModel1(seed=seed, p=p)
    if model == 2:
        return SeededModel2(seed=seed, p=p)
    raise ContractError(f"model: expected 1 or 2, got {model}")


def walks(seeds: Sequence[int], depth: int, p: Fraction) -> np.ndarray:
    """S_0 .. S_depth for each Model-1 seed, shape (len(seeds), depth + 1)."""
    steps = model1_walk_steps(seeds, depth, p).astype(np.int64)
    out = np.zeros((len(seeds), depth + 1), dtype=np.int64)
    np.cumsum(steps, axis=1, out=out[:, 1:])
    return out


def first_pattern_stage(walk: np.ndarray, mirrored: bool = False) -> np.ndarray:
    """Stage n + 1 at which a Z-shape first appears, from the first S_{2n-1}, S_{2n}, S_{2n+1} = -1, 0, 1.

    -1 where the run never shows up within the walk.
    """
    s = -walk if mirrored else walk
    last = (s.shape[1] - 2) // 2
    if last < 1:
        return np.full(s.shape[0], -1, dtype=np.int64)
    n = np.arange(1, last + 1)
    hit = (s[:, 2 * n - 1] == -1) & (s[:, 2 * n] == 0) & (s[:, 2 * n + 1] == 1)
    return np.where(hit.any(axis=1), hit.argmax(axis=1) + 2, -1)


def iter_zero_cells(provider: SignProvider, stages: int) -> Iterator[CellSet]:
    """Gamma_n: cells at depth 2n on which f_2n vanishes somewhere, n = 0..stages."""
    gamma = CellSet.root()
    yield gamma
    for _ in range(stages):
        gamma = gamma.refine(provider).refine(provider)
        gamma = gamma.prune(zero_mask(gamma))
        yield gamma


def first_passage_times(seeds: Sequence[int], m: int, horizon: int) -> np.ndarray:
    """First n with S_n = m for the symmetric walk of each seed; -1 when beyond the horizon."""
    s = walks(seeds, horizon, Fraction(1, 2))
    hit = s == m
    return np.where(hit.any(axis=1), hit.argmax(axis=1), -1)


# exact four-case table


class ZeroState(BaseModel):
    """Counts of Gamma_n: flat zero cells c, and u / l by slope class 1..k (class k lumps |s| >= 2k)."""

    c: int
    u: List[int]
    l: List[int]

    @property
    def k(self) -> int:
        return len(self.u)

    def vector(self) -> List[int]:
        return [self.c] + [a + b for a, b in zip(self.u, self.l)]


def zero_state(gamma: CellSet, k: int) -> ZeroState:
    s = gamma.slopes
    low = np.minimum(gamma.values, gamma.right)
    high = np.maximum(gamma.values, gamma.right)
    flat = s == 0
    plus = ~flat & (low >= 0)
    minus = ~flat & (high <= 0)
    if np.any(~flat & ~plus & ~minus):
        raise IdentityError(f"depth {gamma.depth}: a zero cell crosses the axis inside the cell")
    grade = np.minimum(np.abs(s) // 2, k)
    return ZeroState(
        c=int(np.count_nonzero(flat)),
        u=[int(np.count_nonzero(plus & (grade == i))) for i in range(1, k + 1)],
        l=[int(np.count_nonzero(minus & (grade == i))) for i in range(1, k + 1)],
    )


def _table_rows(case: Tuple[int, int], before: ZeroState, after: ZeroState) -> Dict[str, bool]:
    """Every row of the transition table for one sign pair; 1-based classes."""
    k = before.k
    c = before.c
    u, l = [0] + before.u, [0] + before.l
    u2, l2 = [0] + after.u, [0] + after.l
    if case[0] != case[1]:
        grow, keep = (u, l) if case == (1, -1) else (l, u)
        grow2, keep2 = (u2, l2) if case == (1, -1) else (l2, u2)
        rows = {"c' = 2c": after.c == 2 * c, "class 1 gains 2c": grow2[1] == 2 * c + grow[1]}
        rows.update({f"class {i} kept": grow2[i] == grow[i] for i in range(2, k + 1)})
        rows.update({f"other side class {i} kept": keep2[i] == keep[i] for i in range(1, k + 1)})
        return rows
    # (+,+) moves u up and l down; (-,-) is the mirror
    up, down = (u, l) if case == (1, 1) else (l, u)
    up2, down2 = (u2, l2) if case == (1, 1) else (l2, u2)
    rows = {
        "c' = down class 1": after.c == down[1],
        "up class 1 = 2c": up2[1] == 2 * c,
        "down class 1 = classes 1 + 2": down2[1] == down[1] + down[2],
        f"up class {k} absorbs {k - 1}": up2[k] == up[k - 1] + up[k],
        # replaces the literal row down2[k - 1] == down[k]; part of the lumped class k can stay in k
        f"down classes {k - 1} + {k} = old {k}": down2[k - 1] + down2[k] == down[k],
        f"down class {k} shrinks": down2[k] <= down[k],
    }
    rows.update({f"up class {i} shifts": up2[i] == up[i - 1] for i in range(2, k)})
    rows.update({f"down class {i} shifts": down2[i] == down[i + 1] for i in range(2, k - 1)})
    return rows


def four_case_table_check(levels: Sequence[int], k_trunc: int = 3, strict: bool = True) -> SelfTestReport:
    """Apply the four sign pairs to the Gamma state reached by a Model-1 prefix.

    Checks each table row exactly and that the four-case average of
    (c, sigma_1..sigma_k) is dominated by A_k applied to the current vector.
    """
    if k_trunc < 3:
        raise DomainError(f"k: truncation class must be at least 3, got {k_trunc}")
    if len(levels) % 2:
        raise ContractError(f"levels: need an even prefix, got {len(levels)} signs")
    gamma = list(iter_zero_cells(ConstantLevels(levels=tuple(levels)), len(levels) // 2))[-1]
    before = zero_state(gamma, k_trunc)
    report = SelfTestReport()
    total = [Fraction(0)] * (k_trunc + 1)
    prefix = "".join("+" if w > 0 else "-" for w in levels)
    for case in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        ones = np.ones(len(gamma), dtype=np.int64)
        nxt = gamma.refine_with(case[0] * ones)
        nxt = nxt.refine_with(case[1] * np.ones(len(nxt), dtype=np.int64))
        after = zero_state(nxt.prune(zero_mask(nxt)), k_trunc)
        label = "".join("+" if w > 0 else "-" for w in case)
        for row, ok in _table_rows(case, before, after).items():
            report.add(f"table {prefix} ({label}) {row}", ok, "" if ok else f"{before} -> {after}")
        total = [t + v for t, v in zip(total, after.vector())]
    bound = spectra.a_k_family(k_trunc).apply(before.vector())
    mean = [t / 4 for t in total]
    dominated = all(a <= b for a, b in zip(mean, bound))
    detail = "" if dominated else f"mean {[format_rational(v) for v in mean]} vs {[format_rational(v) for v in bound]}"
    report.add(f"table {prefix} average <= A_{k_trunc} x", dominated, detail)
    if strict and not report.passed:
        failed = next(check for check in report.checks if not check.passed)
        raise IdentityError(f"{failed.name}: {failed.detail}")
    return report


def reachable_prefixes(count: int, max_stages: int, seed_base: int = 0) -> List[Tuple[int, ...]]:
    """Fair Model-1 prefixes of 1..max_stages stages, one per seed."""
    out = []
    for seed in range(seed_base, seed_base + count):
        stages = 1 + seed % max_stages
        out.append(tuple(int(w) for w in SeededModel1(seed=seed, p=Fraction(1, 2)).level_signs(2 * stages)))
    return out


# per-seed trial batches


def _record(model: int, seed: int, p: Fraction, depth: int, **observables) -> TrialRecord:
    return TrialRecord(model=model, seed=seed, p=p, depth=depth, observables=observables)


def _replayed(model: int, p: Fraction, depth: int, seed: int, body: Callable[[], TrialRecord]) -> TrialRecord:
    try:
        return body()
    except TakagiError:
        logger.error("trial failed: model=%d seed=%d p=%s depth=%d", model, seed, format_rational(p), depth)
        raise


def z_shape_batch(seeds: Sequence[int], p: Fraction, depth: int) -> List[TrialRecord]:
    mirrored = p < Fraction(1, 2)
    stages = first_pattern_stage(walks(seeds, depth, p), mirrored=mirrored)
    return [
        _record(1, seed, p, depth, first_z_stage=int(n) if n >= 0 else None, z_shape=bool(n >= 0))
        for seed, n in zip(seeds, stages.tolist())
    ]


def z_growth_batch(seeds: Sequence[int], p: Fraction, depth: int) -> List[TrialRecord]:
    out = []
    for seed in seeds:

        def body(seed=seed):
            provider = SeededModel1(seed=seed, p=p)
            signs = provider.level_signs(depth)
            counts = [shape_counts(gamma).z_count for gamma in iter_zero_cells(provider, depth // 2)]
            tripled = 0
            for n, (a, b) in enumerate(zip(counts, counts[1:])):
                if b < a:
                    raise IdentityError(f"seed {seed}: Z-shape count fell from {a} to {b} at stage {n + 1}")
                if n + 2 < len(counts) and a > 0 and 2 * n + 2 < depth:
                    triple = tuple(int(w) for w in signs[2 * n: 2 * n + 3])
                    if triple in ((1, -1, -1), (-1, 1, 1)):
                        if counts[n + 2] < 3 * a:
                            raise IdentityError(f"seed {seed}: {triple} at stage {n} did not triple the Z-shapes")
                        tripled += 1
            first = next((n for n, c in enumerate(counts) if c > 0), None)
            return _record(1, seed, p, depth, z_counts=counts, first_z_stage=first, tripled=tripled)

        out.append(_replayed(1, p, depth, seed, body))
    return out


def zero_dimension_batch(seeds: Sequence[int], model: int, p: Fraction, depth: int) -> List[TrialRecord]:
    conditioned = [True] * len(seeds)
    if model == 1:
        walk = walks(seeds, depth, p)
        # a Z-shape of -f is one of f, so either run triggers
        either = (first_pattern_stage(walk) >= 0) | (first_pattern_stage(walk, mirrored=True) >= 0)
        conditioned = either.tolist()
    out = []
    for seed, ok in zip(seeds, conditioned):

        def body(seed=seed, ok=ok):
            report = cover_level(provider_for(model, seed, p), 0, depth)
            fit = fit_dimension(report, parity=0) if report.counts[-1] > 0 else None
            return _record(model, seed, p, depth, cover_counts=report.counts, dimension=fit, conditioned=ok)

        out.append(_replayed(model, p, depth, seed, body))
    return out


def _base4_digits(value: int) -> List[int]:
    digits = []
    while value:
        value, d = divmod(value, 4)
        digits.append(d)
    return digits


def max_level_digits(value: int, stages: int) -> List[int]:
    """Digits of a scaled maximum at depth 2 * stages, deepest level first.

    Entry i is 1 when the maximum gained 4**-(stages - 1 - i) / 2 at that level and
    0 when the level is sign-free. Raises ContractError off the {0, 1} support.
    """
    digits = _base4_digits(2 * value)
    digits += [0] * (stages + 1 - len(digits))
    if len(digits) > stages + 1 or digits[0] != 0 or any(d not in (0, 1) for d in digits):
        raise ContractError(f"max: {value} / 4^{stages} is not half a sum of distinct powers of 1/4")
    return digits[1:]


def check_cofinite_tail(value: int, stages: int, k: int) -> None:
    """Raise ContractError when one of the last k levels of the maximum is sign-free.

    At finite depth this is the visible part of the cofiniteness of the level set
    the maximum is summed over.
    """
    tail = max_level_digits(value, stages)[: min(k, stages)]
    if 0 in tail:
        level = stages - 1 - tail.index(0)
        raise ContractError(f"max: level {level} of the last {k} is sign-free, {value} / 4^{stages}")


def gw_batch(seeds: Sequence[int], p: Fraction, depth: int, tail_levels: int = COFINITE_TAIL) -> List[TrialRecord]:
    stages = depth // 2
    out = []
    for seed in seeds:

        def body(seed=seed):
            provider = SeededModel2(seed=seed, p=p)
            flat = CellSet.root()
            sizes, offspring = [1], [0, 0, 0]
            for n in range(stages):
                if len(flat) == 0:
                    sizes.append(0)
                    continue
                kids = flat.refine(provider).refine(provider)
                top = 2 * (4 ** (n + 1) - 1) // 3
                keep = (kids.slopes == 0) & (kids.values == top)
                per_parent = keep.reshape(-1, 4).sum(axis=1)
                offspring = [a + int(np.count_nonzero(per_parent == i)) for i, a in enumerate(offspring)]
                flat = kids.prune(keep)
                sizes.append(len(flat))
            counts, maxima = [], []
            for cs in iter_max_cover(provider, depth):
                counts.append(len(cs))
                if cs.depth % 2 == 0:
                    maxima.append(int(np.maximum(cs.values, cs.right).max()))
            support = all(d in (0, 1) for v in maxima for d in _base4_digits(2 * v))
            survived = sizes[-1] > 0
            sign_free = 0
            if support:
                sign_free = max_level_digits(maxima[-1], stages).count(0)
            dimension = None
            if survived:
                # a flat cell at the top through every stage: no level may be sign-free
                check_cofinite_tail(maxima[-1], stages, tail_levels)
                report = CoverReport(target="max", depths=list(range(1, depth + 1)), counts=counts[1:])
                dimension = fit_dimension(report, parity=0)
            return _record(
                2, seed, p, depth,
                gw_sizes=sizes, offspring=offspring, gw_extinct=not survived,
                cover_counts=counts, max_values=maxima, max_value=maxima[-1],
                support_ok=support, sign_free_levels=sign_free, dimension=dimension,
            )

        out.append(_replayed(2, p, depth, seed, body))
    return out


def hitting_batch(seeds: Sequence[int], m: int, horizon: int) -> List[TrialRecord]:
    taus = first_passage_times(seeds, m, horizon)
    half = Fraction(1, 2)
    return [
        _record(1, seed, half, horizon, level=m, tau=int(t) if t >= 0 else None)
        for seed, t in zip(seeds, taus.tolist())
    ]


def model1_max_batch(seeds: Sequence[int], p: Fraction, depth: int) -> List[TrialRecord]:
    out = []
    for seed in seeds:

        def body(seed=seed):
            counts = [len(cs) for cs in iter_max_cover(SeededModel1(seed=seed, p=p), depth)]
            report = CoverReport(target="max", depths=list(range(1, depth + 1)), counts=counts[1:])
            return _record(1, seed, p, depth, cover_counts=counts, dimension=fit_dimension(report, parity=0))

        out.append(_replayed(1, p, depth, seed, body))
    return out


class GwSummary(BaseModel):
    prob_two_thirds: Estimate
    dim_fit: Optional[Estimate] = None
    support_check: bool
    offspring: List[int]
    in_proven_range: bool


class HittingSummary(BaseModel):
    level: int
    horizon: int
    censored: int
    finite_by_horizon: Estimate
    pgf: Dict[str, Estimate]


def _check_p(p) -> Fraction:
    p = parse_rational(p, flag="p")
    if not 0 < p < 1:
        raise DomainError(f"p: {format_rational(p)} is outside (0, 1)")
    return p


class MonteCarloClient:
    """Runs seeded trial batches concurrently and reduces them to estimates.

    Batches of `batch_size` seeds go to worker threads, at most `jobs` at a
    time; records come back sorted by seed, so nothing depends on `jobs`.
    """

    def __init__(self, jobs: int = 1, batch_size: int = DEFAULT_BATCH_SIZE):
        if jobs < 1 or batch_size < 1:
            raise ContractError(f"jobs: expected jobs >= 1 and batch size >= 1, got {jobs} and {batch_size}")
        self.jobs = jobs
        self.batch_size = batch_size
        self._semaphore: Optional[asyncio.Semaphore] = None

    async def __aenter__(self):
        self._semaphore = asyncio.Semaphore(self.jobs)
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb):
        self._semaphore = None

    async def run(self, trial: BatchTrial, seeds: Sequence[int]) -> List[TrialRecord]:
        try:
            semaphore = self._semaphore or asyncio.Semaphore(self.jobs)
            seeds = list(seeds)
            batches = [seeds[i : i + self.batch_size] for i in range(0, len(seeds), self.batch_size)]

            async def one(batch: List[int]) -> List[TrialRecord]:
                async with semaphore:
                    return await asyncio.to_thread(trial, batch)

            results = await asyncio.gather(*(one(batch) for batch in batches))
            logger.debug("ran %d trials in %d batches", len(seeds), len(batches))
            return sorted((r for batch in results for r in batch), key=lambda r: r.seed)
        except TakagiError:
            raise
        except Exception as e:
            raise TakagiError(f"Simulation failed: {str(e)}") from e

    @staticmethod
    def seeds(trials: int, seed_base: int = 0) -> range:
        if trials < 1:
            raise DomainError(f"trials: must be positive, got {trials}")
        return range(seed_base, seed_base + trials)

    async def z_shape_probability(
        self, p, trials: int, depth: int, seed_base: int = 0
    ) -> Tuple[Estimate, List[TrialRecord]]:
        """Fraction of Model-1 walks showing the Z-trigger run; tends to min(q/p, p/q)."""
        p = _check_p(p)
        if depth % 2:
            raise ContractError(f"depth: must be even, got {depth}")
        records = await self.run(lambda b: z_shape_batch(b, p, depth), self.seeds(trials, seed_base))
        q = 1 - p
        target = float(min(q / p, p / q))
        hits = [1.0 if r.observables["z_shape"] else 0.0 for r in records]
        return summarize(hits, target, "z-shape probability"), records

    async def z_growth_rate(
        self, trials: int, depth: int, p=Fraction(1, 2), seed_base: int = 0
    ) -> Tuple[Estimate, List[TrialRecord]]:
        """Mean of log(N_final / N_first) per stage over seeds with an early Z-shape."""
        p = _check_p(p)
        if depth % 2:
            raise ContractError(f"depth: must be even, got {depth}")
        records = await self.run(lambda b: z_growth_batch(b, p, depth), self.seeds(trials, seed_base))
        final = depth // 2
        rates = []
        for record in records:
            first, counts = record.observables["first_z_stage"], record.observables["z_counts"]
            if first is not None and first < final:
                rates.append(math.log(counts[-1] / counts[first]) / (final - first))
        if not rates:
            raise InconclusiveError(f"trials: no Z-shape appeared in {trials} trials by depth {depth}")
        return summarize(rates, z_growth_lower_rate(p), "Z-shape growth rate"), records

    async def zero_dimension(
        self, model: int, trials: int, depth: int, p=Fraction(1, 2), seed_base: int = 0
    ) -> Tuple[Estimate, List[TrialRecord]]:
        p = _check_p(p)
        records = await self.run(lambda b: zero_dimension_batch(b, model, p, depth), self.seeds(trials, seed_base))
        fits = [
            r.observables["dimension"]
            for r in records
            if r.observables["conditioned"] and r.observables["dimension"] is not None
        ]
        if not fits:
            raise InconclusiveError(f"trials: every zero cover was empty or unconditioned at depth {depth}")
        if model == 1:
            logger.warning(
                "model 1 zero-set dimension is exploratory; only the lower bound %.6f is known",
                zero_dimension_lower_bound(p),
            )
        target = spectra.D0 if model == 2 and p == Fraction(1, 2) else None
        return summarize(fits, target, f"model {model} zero dimension"), records

    async def gw_maximum(
        self, p, trials: int, depth: int, seed_base: int = 0
    ) -> Tuple[GwSummary, List[TrialRecord]]:
        p = _check_p(p)
        if depth % 2:
            raise ContractError(f"depth: must be even, got {depth}")
        records = await self.run(lambda b: gw_batch(b, p, depth), self.seeds(trials, seed_base))
        survived = [0.0 if r.observables["gw_extinct"] else 1.0 for r in records]
        in_range = 2 * p * p > 1
        if not in_range:
            logger.warning("p=%s is outside the proven range p > 1/sqrt(2); output is exploratory", format_rational(p))
        fits = [r.observables["dimension"] for r in records if r.observables["dimension"] is not None]
        dim_fit = None
        if fits:
            dim_fit = summarize(fits, gw_max_dimension(p) if in_range else None, "maximum-set dimension")
        offspring = [sum(r.observables["offspring"][i] for r in records) for i in range(3)]
        summary = GwSummary(
            prob_two_thirds=summarize(survived, gw_survival_probability(p), "P(max = 2/3)"),
            dim_fit=dim_fit,
            support_check=all(r.observables["support_ok"] for r in records),
            offspring=offspring,
            in_proven_range=in_range,
        )
        return summary, records

    async def hitting_times(
        self, m: int, trials: int, horizon: int, seed_base: int = 0, points: Sequence[float] = PGF_POINTS
    ) -> Tuple[HittingSummary, List[TrialRecord]]:
        """Empirical pgf of tau_m; censored walks contribute r**horizon, an upward bias."""
        if m not in (1, 2):
            raise DomainError(f"m: hitting level must be 1 or 2, got {m}")
        records = await self.run(lambda b: hitting_batch(b, m, horizon), self.seeds(trials, seed_base))
        taus = [r.observables["tau"] for r in records]
        censored = sum(t is None for t in taus)
        pgf = {}
        for r in points:
            samples = [r ** (horizon if t is None else t) for t in taus]
            pgf[f"{r:g}"] = summarize(samples, spectra.psi(m, r), f"pgf of tau_{m} at {r:g}")
        finite = summarize([0.0 if t is None else 1.0 for t in taus], 1.0, f"P(tau_{m} <= {horizon})")
        summary = HittingSummary(level=m, horizon=horizon, censored=censored, finite_by_horizon=finite, pgf=pgf)
        return summary, records

    async def model1_max_dimension(
        self, p, trials: int, depth: int, seed_base: int = 0
    ) -> Tuple[Estimate, List[TrialRecord]]:
        p = _check_p(p)
        records = await self.run(lambda b: model1_max_batch(b, p, depth), self.seeds(trials, seed_base))
        fits = [r.observables["dimension"] for r in records]
        return summarize(fits, model1_max_dimension(p), "model 1 maximum-set dimension"), records
