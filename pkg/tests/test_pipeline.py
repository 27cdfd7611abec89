from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from heraldsim import rates
from heraldsim.coincidence import count
from heraldsim.pipeline import Selection, SelectionTable, simulate_runs

FOUR = Selection(sources=(1, 2), heralds=(1, 2), min_live=2)
TWO = Selection(sources=(1, 2), heralds=(), min_live=2)
SINGLE = Selection(sources=(1,), heralds=(1,))


def _counts(setup, plan, sets):
    streams = simulate_runs([plan])[0]
    return count(streams, replace(setup.coincidence, sets=sets), duration=plan.duration)


def _close(observed, expected, n_sigma=4.0):
    return abs(observed - expected) <= n_sigma * np.sqrt(expected)


@pytest.mark.parametrize("delay", [0.0, 3e-12, 20e-12])
def test_four_fold_matches_closed_form(setup, eta, delay):
    plan = setup.plan(power_mw=100, duration=20000, selection=FOUR, key=("dual-4", delay), delay=delay,
                      dark_mode="none")
    observed = _counts(setup, plan, ((1, 2, 3, 4),)).cc(1, 2, 3, 4)
    m = setup.mode_means(100)
    o = float(np.interp(delay, setup.network.overlap_delays, setup.network.overlap_values))
    expected = rates.four_fold_probability(rates.pair_pmf(m[1]), rates.pair_pmf(m[2]), eta, o) * setup.repetition_rate * plan.duration
    assert _close(observed, expected), (observed, expected)


def test_blocked_four_fold_matches_closed_form(setup, eta):
    plan = setup.plan(power_mw=100, duration=40000, selection=FOUR, key=("dual-bg",), delay=15e-12,
                      blocked=(1,), dark_mode="none")
    observed = _counts(setup, plan, ((1, 2, 3, 4),)).cc(1, 2, 3, 4)
    m = setup.mode_means(100)
    expected = rates.four_fold_probability(rates.pair_pmf(m[1]), rates.pair_pmf(m[2]), eta, 0.0,
                                           blocked=(1,)) * setup.repetition_rate * plan.duration
    assert _close(observed, expected), (observed, expected)


def test_two_fold_matches_closed_form(setup, eta):
    plan = setup.plan(power_mw=100, duration=20, selection=TWO, key=("dual-2",), delay=20e-12, dark_mode="none")
    observed = _counts(setup, plan, ((2, 3),)).cc(2, 3)
    m = setup.mode_means(100)
    expected = rates.two_fold_probability(rates.pair_pmf(m[1]), rates.pair_pmf(m[2]), eta, 0.0) * setup.repetition_rate * plan.duration
    assert _close(observed, expected), (observed, expected)


def test_herald_triples_match_closed_form(setup, eta):
    # at 30 mW dead time hardly matters for the herald-signal counts
    plan = setup.plan(power_mw=30, duration=5, selection=SINGLE, key=("dual-h",), dark_mode="none")
    rep = _counts(setup, plan, ((1, 2), (1, 3), (1, 2, 3)))
    pmf = rates.pair_pmf(setup.mode_means(30)[1])
    p_ha, p_hb, p_hab = rates.herald_signal_probabilities(pmf, eta[0], eta[1], eta[2])
    n = setup.repetition_rate * plan.duration
    assert _close(rep.cc(1, 2, 3), p_hab * n)
    assert rep.cc(1, 2) == pytest.approx(p_ha * n, rel=0.02)
    assert rep.cc(1, 3) == pytest.approx(p_hb * n, rel=0.02)


def test_selection_probability_matches_direct_sum(setup, eta):
    plan = setup.plan(power_mw=100, duration=1, selection=FOUR, key=("t",))
    table = SelectionTable(plan)
    m = setup.mode_means(100)
    p1, p2 = rates.pair_pmf(m[1]), rates.pair_pmf(m[2])
    p_live = 1 - (1 - eta[1]) * (1 - eta[2])
    total = 0.0
    for n1 in range(12):
        for n2 in range(12):
            h = (1 - (1 - eta[0]) ** n1) * (1 - (1 - eta[3]) ** n2)
            total += p1[n1] * p2[n2] * h * stats.binom.sf(1, n1 + n2, p_live)
    assert table.probability == pytest.approx(total, rel=1e-9)
    plan0 = setup.plan(power_mw=100, duration=1, selection=Selection(), key=("t",))
    assert SelectionTable(plan0).probability == pytest.approx(1 - p1[0] * p2[0], rel=1e-12)


def test_results_independent_of_worker_count(setup):
    plans = [setup.plan(power_mw=100, duration=3000, selection=FOUR, key=("w", i), delay=i * 1e-12,
                        dark_mode="local") for i in range(3)]
    plans = [replace(p, block_selected=2000) for p in plans]
    one = simulate_runs(plans, workers=1)
    three = simulate_runs(plans, workers=3)
    for a, b in zip(one, three):
        for c in a:
            np.testing.assert_array_equal(a[c], b[c])


def test_different_keys_give_different_streams(setup):
    a, b = (simulate_runs([setup.plan(power_mw=100, duration=0.001, selection=Selection(), key=(k,))])[0]
            for k in ("a", "b"))
    assert not np.array_equal(a[1], b[1])


def test_zero_power_gives_only_darks(setup):
    plan = setup.plan(power_mw=0, duration=1.0, selection=Selection(), key=("dark",))
    streams = simulate_runs([plan])[0]
    for t in streams.values():
        assert 100 - 50 < t.size < 100 + 50


def test_plan_rejects_empty_duration(setup):
    with pytest.raises(ValueError):
        setup.plan(power_mw=1, duration=0.0, selection=Selection(), key=())
