import logging

import numpy as np
import pytest
from fractions import Fraction

from takagi.errors import ContractError, EmptyLevelSetError
from takagi.levelsets import (
    cover_level,
    cover_line,
    detect_shapes,
    dominated_by_e_or_f,
    fit_dimension,
    iter_line_cover,
    iter_triples,
    max_counts,
    max_set_cover,
    shape_counts,
    strip_counts,
    strip_index,
    triple_state,
    with_fit,
)
from takagi.piecewise import build
from takagi.randomsim import iter_zero_cells
from takagi.schema import CoverReport
from takagi.signs import AllPlus, ConstantLevels, Rademacher, SeededModel2


def test_strip_counts_takagi():
    gf = build(AllPlus(), 2)
    upper = strip_counts(gf, 1)
    assert (upper.n0, upper.n1) == (2, 0)
    lower = strip_counts(gf, 0)
    assert (lower.n0, lower.n1) == (0, 2)


def test_strip_counts_needs_even_depth():
    with pytest.raises(ContractError):
        strip_counts(build(AllPlus(), 3), 0)


def test_max_counts():
    assert tuple(max_counts(build(AllPlus(), 2))) == (2, 2, 10)
    assert tuple(max_counts(build(AllPlus(), 0))) == (1, 0, 2)


def test_triple_state_at_zero():
    state = triple_state(build(AllPlus(), 2), Fraction(0))
    assert (state.c, state.l, state.u) == (0, 0, 2)
    assert state.vector() == [0, 2, 2]


def test_strip_index_moves_up_in_upper_half():
    assert strip_index(Fraction(0), 3) == 0
    assert strip_index(Fraction(1, 4), 1) == 1
    assert strip_index(Fraction(1, 8), 1) == 0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_triples_are_dominated(seed):
    provider = SeededModel2(seed=seed)
    states = list(iter_triples(provider, Fraction(1, 5), 5))
    assert len(states) == 6
    for before, after in zip(states, states[1:]):
        assert dominated_by_e_or_f(before, after)


@pytest.mark.slow
@pytest.mark.parametrize("seed, y", [(seed, Fraction(seed % 41, 61)) for seed in range(200)])
def test_triples_are_dominated_over_ten_stages(seed, y):
    states = list(iter_triples(SeededModel2(seed=100 + seed), y, 10))
    assert len(states) == 11
    for before, after in zip(states, states[1:]):
        assert dominated_by_e_or_f(before, after), f"stage {after.n}: {before.vector()} -> {after.vector()}"


def test_detect_shapes_constant_levels():
    gf = build(ConstantLevels(levels=(-1, 1, 1, 1)), 4)
    assert gf.values.tolist() == [0, 2, 2, 2, 0, 0, -2, -4, -8, -4, -2, 0, 0, 2, 2, 2, 0]
    assert tuple(detect_shapes(gf)) == (2, 0)


@pytest.mark.parametrize("y", [Fraction(0), Fraction(1, 3), Fraction(-1, 5)])
def test_sparse_cover_matches_dense_test(y):
    provider = SeededModel2(seed=21)
    depth = 9
    gf = build(provider, depth)
    low, high = gf.bounds()
    target = y * gf.cells
    num, den = target.numerator, target.denominator
    dense = np.flatnonzero((den * low <= num) & (num <= den * high))
    *_, last = iter_line_cover(provider, 0, y, depth)
    assert last.cells.tolist() == dense.tolist()


def test_cover_counts_are_nested():
    report = cover_level(Rademacher(), Fraction(2, 5), 12)
    assert report.depths == list(range(1, 13))
    assert all(b <= 2 * a for a, b in zip(report.counts, report.counts[1:]))


def test_cover_above_the_maximum_is_empty():
    assert cover_level(SeededModel2(seed=4), Fraction(3, 4), 4).counts[-1] == 0
    report = cover_level(AllPlus(), Fraction(3, 4), 6)
    with pytest.raises(EmptyLevelSetError):
        with_fit(report)


def test_cover_line_target_and_min_depth():
    report = cover_line(AllPlus(), 2, Fraction(0), 6, min_depth=0)
    assert report.target == "line m=2 b=0"
    assert report.depths[0] == 0
    assert report.counts[0] == 1


def test_takagi_max_set_dimension():
    report = with_fit(max_set_cover(AllPlus(), 22), skip=6)
    assert report.fitted_dimension == pytest.approx(0.5, abs=0.1)


def test_fit_exact_growth():
    report = CoverReport(target="t", depths=list(range(1, 11)), counts=[2**d for d in range(1, 11)])
    assert fit_dimension(report) == pytest.approx(1.0)
    fitted = with_fit(report, method="ratio", period=2)
    assert fitted.fitted_dimension == pytest.approx(1.0)
    assert fitted.residual == pytest.approx(0.0)
    assert fitted.method == "ratio"


def test_fit_parity_and_errors():
    report = CoverReport(depths=[1, 2, 3, 4, 5, 6], counts=[1, 2, 2, 4, 4, 8])
    assert fit_dimension(report, method="ratio", parity=0) == pytest.approx(0.5)
    with pytest.raises(ContractError):
        fit_dimension(report, method="spline")
    with pytest.raises(ContractError):
        fit_dimension(CoverReport(depths=[1], counts=[3]))


def test_fit_warns_on_non_monotone_counts(caplog):
    report = CoverReport(target="wobbly", depths=[1, 2, 3, 4, 5], counts=[2, 4, 3, 8, 16])
    with caplog.at_level(logging.WARNING, logger="takagi.levelsets"):
        fit_dimension(report, skip=0)
    assert "non-monotone" in caplog.text


@pytest.mark.parametrize(
    "provider, slope, intercept",
    [
        (SeededModel2(seed=3), 0, Fraction(0)),
        (AllPlus(), 0, Fraction(1, 2)),
        (Rademacher(), 0, Fraction(1, 2)),
        (Rademacher(), 2, Fraction(0)),
        (SeededModel2(seed=8), -1, Fraction(1)),
    ],
)
def test_cover_keeps_every_grid_point_of_the_section(provider, slope, intercept):
    # f(j / 2**depth) = f_depth(j / 2**depth), so the dense grid finds these points exactly
    depth = 12
    gf = build(provider, depth)
    j = np.arange(gf.cells + 1)
    hits = np.flatnonzero(gf.values == slope * j + int(intercept * gf.cells))
    assert hits.size > 0
    for cs in iter_line_cover(provider, slope, intercept, depth):
        containing = np.minimum(hits >> (depth - cs.depth), (1 << cs.depth) - 1)
        assert set(containing.tolist()) <= set(cs.cells.tolist()), f"depth {cs.depth}"
    if slope == 0:
        assert cover_level(provider, intercept, depth).counts == [
            len(cs) for cs in iter_line_cover(provider, 0, intercept, depth)
        ][1:]
    else:
        assert cover_line(provider, slope, intercept, depth).depths == list(range(1, depth + 1))


@pytest.mark.parametrize("y", [Fraction(1, 3), Fraction(-1, 3)])
def test_third_level_cover_stays_small(y):
    for seed in range(100):
        counts = cover_level(SeededModel2(seed=seed), y, 20).counts
        assert max(counts) <= 8, f"seed {seed}: {counts}"


def test_gray_two_fifths_cover_dimension():
    report = with_fit(cover_level(Rademacher(), Fraction(2, 5), 20, min_depth=8), skip=0)
    assert report.depths == list(range(8, 21))
    assert report.fitted_dimension == pytest.approx(0.5, abs=0.05)


@pytest.mark.parametrize("tail", [(1, -1, -1, 1), (1, -1, -1, -1), (-1, 1, 1, 1), (-1, 1, 1, -1)])
def test_z_shapes_triple_two_stages_after_the_trigger(tail):
    # (-, +, +) leaves one rising and one falling Z-shape at stage 2
    provider = ConstantLevels(levels=(-1, 1, 1, 1) + tail)
    counts = [shape_counts(gamma).z_count for gamma in iter_zero_cells(provider, 4)]
    assert counts[:3] == [0, 0, 2]
    assert counts[3] >= counts[2]
    assert counts[4] >= 3 * counts[2]
