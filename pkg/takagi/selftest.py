"""Exact identity suites behind `takagi selftest`, plus an optional Monte Carlo tier."""

import logging
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from takagi import constructions, spectra
from takagi.errors import TakagiError
from takagi.piecewise import CellSet, build
from takagi.randomsim import (
    MonteCarloClient,
    four_case_table_check,
    gw_extinction_by,
    pattern_free_probability,
    reachable_prefixes,
)
from takagi.schema import SelfTestReport
from takagi.signs import AllPlus, Alternating, Rademacher, RademacherProduct, SeededModel1, SeededModel2

logger = logging.getLogger(__name__)

GRID_DEPTH = 12
TABLE_PREFIXES = 16


def _guard(report: SelfTestReport, name: str, check: Callable[[], Optional[str]]) -> None:
    """Run one check; a returned string or a raised TakagiError marks it failed."""
    try:
        problem = check()
    except TakagiError as e:
        problem = str(e)
    report.add(name, problem is None, problem or "")


def _completes(check: Callable, *args) -> Callable[[], None]:
    """Checks that raise IdentityError on failure and return data otherwise."""

    def run() -> None:
        check(*args)

    return run


def grid_invariants(report: SelfTestReport) -> None:
    providers = [
        AllPlus(),
        Alternating(),
        Rademacher(),
        RademacherProduct(),
        SeededModel1(seed=7, p=Fraction(1, 2)),
        SeededModel2(seed=7, p=Fraction(3, 4)),
    ]
    for provider in providers:
        gf = build(provider, GRID_DEPTH)
        bad = gf.violations()
        report.add(f"grid {provider.header()}", not bad, ", ".join(bad))

    def nesting():
        # children envelopes sit inside the parent envelope
        gf = build(SeededModel2(seed=11, p=Fraction(1, 2)), GRID_DEPTH - 1)
        parent = CellSet.from_grid(gf)
        child = parent.refine(SeededModel2(seed=11, p=Fraction(1, 2)))
        low, high = parent.bounds()
        child_low, child_high = child.bounds()
        inside = (2 * np.repeat(low, 2) <= child_low) & (child_high <= 2 * np.repeat(high, 2))
        return None if inside.all() else f"{int(np.count_nonzero(~inside))} children leave their parent"

    _guard(report, "cover nesting", nesting)
    _guard(report, "gray functional equation", lambda: constructions.check_gray_functional_equation(GRID_DEPTH))


def transcriptions(report: SelfTestReport, matrices_dir: Optional[str] = None) -> None:
    for name, matrix in spectra.NAMED_MATRICES.items():
        parsed = spectra.parse_matrices(matrix.to_text(name))
        problem = spectra.compare_transcription(name, parsed[name])
        report.add(f"transcription {name} (pinned)", problem is None, problem or "")
    if not matrices_dir:
        return
    for path in sorted(Path(matrices_dir).glob("*.txt")):

        def check(path=path):
            parsed = spectra.parse_matrices(path.read_text())
            name = path.stem if path.stem in parsed else next(iter(parsed))
            return spectra.compare_transcription(name, parsed[name])

        _guard(report, f"transcription {path.name}", check)


def jsr_identities(report: SelfTestReport) -> None:
    report.checks.extend(spectra.verify_jsr_identities(strict=False).checks)


def table_suite(report: SelfTestReport) -> None:
    for levels in reachable_prefixes(TABLE_PREFIXES, max_stages=6):
        for k in (3, 4):
            report.checks.extend(four_case_table_check(levels, k_trunc=k, strict=False).checks)


def construction_suite(report: SelfTestReport) -> None:
    def extremal():
        built = constructions.extremal_flexible(6)
        construction_types = [stage.type_counts() for stage in built.cells]
        for n, (t, t_next) in enumerate(zip(construction_types, construction_types[1:])):
            step = spectra.A if n % 2 == 0 else spectra.B
            if step.apply(t) != t_next:
                return f"stage {n + 1}: types {t_next}, expected {step.apply(t)}"
        return None

    def rigid():
        y, path = constructions.rigid_extremal_level([1, 1, -1, 1, 1, -1])
        steps = {b - 4 * a for a, b in zip(path, path[1:])}
        return None if steps <= {-1, 0, 1} else f"path {path} for y={y}"

    _guard(report, "extremal construction types", extremal)
    _guard(report, "rigid extremal path", rigid)
    _guard(report, "constant-level bounds", _completes(constructions.exhaustive_constant_level_check, 4))
    _guard(report, "gray count bounds", _completes(constructions.gray_count_bounds, 6))
    _guard(report, "gray zero self-similarity", _completes(constructions.gray_zero_points, 3))
    _guard(report, "gray 2/5 copies", _completes(constructions.gray_level_two_fifths, 6))


async def mc_suite(report: SelfTestReport, client: MonteCarloClient) -> None:
    """Fast statistical spot checks at 3 sigma."""

    async def z_shape():
        estimate, _ = await client.z_shape_probability(Fraction(3, 5), 4000, 200)
        reference = 1 - pattern_free_probability(Fraction(3, 5), 200)
        return None if estimate.within(reference) else f"{estimate.mean:.4f} vs {reference:.4f}"

    async def gw():
        summary, _ = await client.gw_maximum(Fraction(4, 5), 2000, 12)
        target = 1 - gw_extinction_by(Fraction(4, 5), 6)
        ok = summary.prob_two_thirds.within(target) and summary.support_check
        return None if ok else f"P(max = 2/3) {summary.prob_two_thirds.mean:.4f} vs {target:.4f}"

    for name, check in (("mc z-shape probability", z_shape), ("mc gw survival", gw)):
        try:
            problem = await check()
        except TakagiError as e:
            problem = str(e)
        report.add(name, problem is None, problem or "")


async def run_selftest(
    matrices_dir: Optional[str] = None, mc: bool = False, client: Optional[MonteCarloClient] = None
) -> SelfTestReport:
    report = SelfTestReport()
    grid_invariants(report)
    transcriptions(report, matrices_dir)
    jsr_identities(report)
    table_suite(report)
    construction_suite(report)
    if mc:
        async with client or MonteCarloClient() as active:
            await mc_suite(report, active)
    failed = [check.name for check in report.checks if not check.passed]
    logger.info("selftest: %d checks, %d failed", len(report.checks), len(failed))
    return report
