import logging
import math

import numpy as np
import pytest
from fractions import Fraction
from unittest.mock import patch

from takagi.errors import ContractError, DomainError, IdentityError, InconclusiveError, TakagiError
from takagi.levelsets import iter_max_cover
from takagi.randomsim import (
    PGF_POINTS,
    MonteCarloClient,
    check_cofinite_tail,
    first_passage_times,
    first_pattern_stage,
    four_case_table_check,
    gw_batch,
    gw_extinction_by,
    gw_extinction_probability,
    gw_max_dimension,
    gw_offspring_law,
    gw_survival_probability,
    iter_zero_cells,
    max_level_digits,
    model1_max_dimension,
    pattern_free_probability,
    reachable_prefixes,
    summarize,
    walks,
    zero_dimension_lower_bound,
    zero_state,
    z_growth_batch,
    z_growth_lower_rate,
)
from takagi.signs import AllPlus, ConstantLevels
from takagi.spectra import D0, psi


@pytest.fixture
def client():
    return MonteCarloClient(jobs=2, batch_size=64)


def test_gw_reference_values():
    assert gw_offspring_law(Fraction(1, 2)) == pytest.approx((0.625, 0.25, 0.125))
    assert gw_offspring_law(Fraction(4, 5)) == pytest.approx((0.232, 0.256, 0.512))
    assert gw_survival_probability(Fraction(4, 5)) == pytest.approx(0.546875)
    assert gw_extinction_probability(Fraction(4, 5)) == pytest.approx(0.453125)
    assert gw_max_dimension(Fraction(4, 5)) == pytest.approx(math.log(1.28) / math.log(4))
    assert gw_extinction_by(Fraction(4, 5), 60) == pytest.approx(0.453125, abs=1e-6)
    with pytest.raises(DomainError):
        gw_max_dimension(Fraction(1, 2))


def test_lower_rates():
    assert z_growth_lower_rate() == pytest.approx(math.log(3) / 8)
    assert zero_dimension_lower_bound() == pytest.approx(math.log(3) / (8 * math.log(4)))
    assert model1_max_dimension(Fraction(3, 4)) == pytest.approx(1 / 3)
    assert model1_max_dimension(Fraction(2, 5)) == 0.0


@pytest.mark.parametrize("p", [Fraction(3, 5), Fraction(2, 5), Fraction(7, 8)])
def test_pattern_free_probability_short_walk(p):
    high = max(float(p), 1 - float(p))
    assert pattern_free_probability(p, 3) == pytest.approx(1 - (1 - high) * high**2)
    assert pattern_free_probability(p, 2) == pytest.approx(1.0)


def test_walks_and_patterns():
    walk = np.array([[0, -1, 0, 1, 2], [0, 1, 0, -1, 0]])
    assert first_pattern_stage(walk).tolist() == [2, -1]
    assert first_pattern_stage(walk, mirrored=True).tolist() == [-1, 2]
    s = walks([1, 2, 3], 10, Fraction(1, 2))
    assert s.shape == (3, 11)
    assert (s[:, 0] == 0).all()
    assert (np.abs(np.diff(s, axis=1)) == 1).all()


def test_first_passage_times():
    taus = first_passage_times(range(50), 1, 200)
    s = walks(range(50), 200, Fraction(1, 2))
    for row, tau in zip(s, taus):
        if tau >= 0:
            assert row[tau] == 1 and (row[:tau] < 1).all()


def test_zero_state_constant_levels():
    gamma = list(iter_zero_cells(ConstantLevels(levels=(-1, 1, 1, 1)), 2))[-1]
    assert gamma.cells.tolist() == [0, 3, 4, 5, 10, 11, 12, 15]
    state = zero_state(gamma, 3)
    assert (state.c, state.u, state.l) == (2, [4, 0, 0], [2, 0, 0])
    assert state.vector() == [2, 6, 0, 0]


def test_four_case_table():
    for levels in reachable_prefixes(8, max_stages=4):
        report = four_case_table_check(levels, k_trunc=3)
        assert report.passed
    with pytest.raises(DomainError):
        four_case_table_check((1, 1), k_trunc=2)
    with pytest.raises(ContractError):
        four_case_table_check((1, 1, 1))


def test_summarize():
    estimate = summarize([1.0, 0.0] * 20, target=0.5)
    assert estimate.mean == pytest.approx(0.5)
    assert estimate.trials == 40
    assert estimate.within(0.5)
    with pytest.raises(InconclusiveError):
        summarize([])


def test_summarize_warns_on_few_trials(caplog):
    with caplog.at_level(logging.WARNING, logger="takagi.randomsim"):
        summarize([1.0, 2.0], label="tiny")
    assert "only 2 trials" in caplog.text


def test_client_rejects_zero_jobs():
    with pytest.raises(ContractError):
        MonteCarloClient(jobs=0)


@pytest.mark.asyncio
async def test_run_wraps_plain_exceptions(client):
    def broken(seeds):
        raise ValueError("bad batch")

    with pytest.raises(TakagiError, match="Simulation failed: bad batch"):
        await client.run(broken, range(3))


@pytest.mark.asyncio
async def test_run_passes_takagi_errors_through(client):
    def failing(seeds):
        raise IdentityError("seed 1: broken invariant")

    with pytest.raises(IdentityError):
        await client.run(failing, range(3))


@pytest.mark.asyncio
async def test_records_do_not_depend_on_jobs():
    async with MonteCarloClient(jobs=1) as one:
        first, records_one = await one.z_shape_probability(Fraction(3, 5), 300, 40)
    async with MonteCarloClient(jobs=4, batch_size=7) as many:
        second, records_many = await many.z_shape_probability(Fraction(3, 5), 300, 40)
    assert [r.model_dump() for r in records_one] == [r.model_dump() for r in records_many]
    assert first == second
    assert [r.seed for r in records_one] == list(range(300))


@pytest.mark.asyncio
async def test_client_argument_checks(client):
    with pytest.raises(ContractError):
        await client.z_shape_probability(Fraction(1, 2), 10, 7)
    with pytest.raises(DomainError):
        await client.gw_maximum(Fraction(3, 2), 10, 4)
    with pytest.raises(DomainError):
        await client.hitting_times(3, 10, 50)
    with pytest.raises(DomainError):
        await client.z_shape_probability(Fraction(1, 2), 0, 4)


@pytest.mark.asyncio
async def test_hitting_records_censoring(client):
    summary, records = await client.hitting_times(2, 40, 4)
    assert summary.censored == sum(r.observables["tau"] is None for r in records)
    assert set(summary.pgf) == {"0.5", "0.7", "0.786151"}


@pytest.mark.asyncio
async def test_gw_records(client):
    summary, records = await client.gw_maximum(Fraction(4, 5), 40, 8)
    assert len(records) == 40
    assert summary.in_proven_range
    assert sum(summary.offspring) > 0
    for record in records:
        sizes = record.observables["gw_sizes"]
        assert sizes[0] == 1 and len(sizes) == 5
        assert record.observables["gw_extinct"] == (sizes[-1] == 0)
        if sizes[-1] > 0:
            assert record.observables["sign_free_levels"] == 0
            assert record.observables["max_value"] == 2 * (4**4 - 1) // 3


@pytest.mark.slow
@pytest.mark.asyncio
@pytest.mark.parametrize("p", [Fraction(1, 2), Fraction(3, 5), Fraction(3, 4)])
async def test_z_shape_probability_matches_exact_value(client, p):
    estimate, _ = await client.z_shape_probability(p, 4000, 200)
    q = 1 - p
    assert estimate.target == pytest.approx(float(min(p / q, q / p)))
    assert estimate.within(1 - pattern_free_probability(p, 200), sigmas=3)


@pytest.mark.parametrize("p", [Fraction(3, 5), Fraction(3, 4), Fraction(1, 4)])
def test_finiteness_probability_converges(p):
    q = 1 - p
    finite = 1 - float(min(p / q, q / p))
    assert pattern_free_probability(p, 200) == pytest.approx(finite, abs=1e-3)
    assert pattern_free_probability(p, 40) >= pattern_free_probability(p, 200)


@pytest.mark.slow
@pytest.mark.asyncio
async def test_gw_survival_probability(client):
    summary, _ = await client.gw_maximum(Fraction(4, 5), 2000, 12)
    assert summary.prob_two_thirds.within(1 - gw_extinction_by(Fraction(4, 5), 6), sigmas=3)


@pytest.mark.slow
@pytest.mark.asyncio
async def test_gw_max_set_dimension(client):
    summary, records = await client.gw_maximum(Fraction(4, 5), 400, 24)
    assert summary.dim_fit.target == pytest.approx(math.log(1.28) / math.log(4))
    assert summary.dim_fit.mean == pytest.approx(math.log(1.28) / math.log(4), abs=0.05)
    assert summary.support_check
    assert all(r.observables["sign_free_levels"] == 0 for r in records if not r.observables["gw_extinct"])


@pytest.mark.slow
@pytest.mark.asyncio
@pytest.mark.parametrize("p, trials", [(Fraction(3, 5), 4000), (Fraction(3, 4), 2000), (Fraction(9, 10), 1000)])
async def test_gw_offspring_frequencies(client, p, trials):
    summary, _ = await client.gw_maximum(p, trials, 12)
    total = sum(summary.offspring)
    assert total >= 10_000
    for observed, expected in zip(summary.offspring, gw_offspring_law(p)):
        sigma = math.sqrt(expected * (1 - expected) / total)
        assert abs(observed / total - expected) <= 3 * sigma


@pytest.mark.slow
@pytest.mark.asyncio
@pytest.mark.parametrize("m", [1, 2])
async def test_hitting_time_pgf(client, m):
    summary, _ = await client.hitting_times(m, 4000, 400)
    assert set(summary.pgf) == {f"{r:g}" for r in PGF_POINTS}
    for r in PGF_POINTS:
        estimate = summary.pgf[f"{r:g}"]
        assert estimate.target == pytest.approx(psi(1, r) ** m)
        assert estimate.within(psi(1, r) ** m, sigmas=3)


@pytest.mark.slow
@pytest.mark.asyncio
async def test_model2_zero_dimension(client):
    estimate, records = await client.zero_dimension(2, 100, 24)
    assert len(records) == 100
    assert estimate.target == pytest.approx(D0)
    assert estimate.mean == pytest.approx(D0, abs=0.05)


@pytest.mark.slow
@pytest.mark.asyncio
async def test_z_growth_rate_at_depth_sixty(client):
    estimate, records = await client.z_growth_rate(60, 60)
    assert len(records) == 60
    assert estimate.target == pytest.approx(math.log(3) / 8)
    assert estimate.mean >= estimate.target - 3 * estimate.std_error


def test_z_growth_batch_reaches_depth_sixty():
    for record in z_growth_batch(range(4), Fraction(1, 2), 60):
        counts = record.observables["z_counts"]
        assert len(counts) == 31
        assert all(a <= b for a, b in zip(counts, counts[1:]))
        first = record.observables["first_z_stage"]
        assert first is None or counts[first] > 0


@pytest.mark.slow
@pytest.mark.asyncio
@pytest.mark.parametrize("p, expected", [(Fraction(3, 4), 1 / 3), (Fraction(1, 2), 0.0)])
async def test_model1_max_dimension(client, p, expected):
    estimate, _ = await client.model1_max_dimension(p, 200, 20)
    assert estimate.target == pytest.approx(expected)
    assert estimate.mean == pytest.approx(expected, abs=0.07)


def test_max_level_digits_and_cofinite_tail():
    top = 2 * (4**5 - 1) // 3
    assert max_level_digits(top, 5) == [1] * 5
    check_cofinite_tail(top, 5, 4)
    # only the first two level pairs raise the maximum: 1/2 + 1/8
    finite = (4**5 + 4**4) // 2
    assert max_level_digits(finite, 5) == [0, 0, 0, 1, 1]
    check_cofinite_tail(finite, 5, 0)
    with pytest.raises(ContractError, match="level 4 of the last 4 is sign-free"):
        check_cofinite_tail(finite, 5, 4)
    with pytest.raises(ContractError):
        max_level_digits(3, 2)
    with pytest.raises(ContractError):
        max_level_digits(4**3, 2)


def test_gw_batch_rejects_a_sign_free_tail():
    # the flat top survives under AllPlus while the reported maximum stalls at 1/2
    stalled = ConstantLevels(levels=(1, 1), default=-1)
    with patch("takagi.randomsim.SeededModel2", side_effect=lambda seed, p: AllPlus()), patch(
        "takagi.randomsim.iter_max_cover", side_effect=lambda provider, depth: iter_max_cover(stalled, depth)
    ):
        with pytest.raises(ContractError, match="sign-free"):
            gw_batch([0], Fraction(4, 5), 8)
