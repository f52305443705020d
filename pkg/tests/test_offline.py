"""Offline planner: water filling, the N sweep, and energy accounting."""

import math

import numpy as np
import pytest

from predalloc.channel import ChannelTrace
from predalloc.offline import (
    AllocationSolution,
    PowerModel,
    optimize,
    solve_given_N,
    total_energy,
    water_fill,
)

from _oracles import brute_force_min_energy, reference_water_fill


def make_trace(gains):
    gains = np.asarray(gains, float)
    return ChannelTrace(np.array([1.0]), gains, gains.size)


TOY_PM = PowerModel(pa_efficiency=1.0, p_active_w=1.0, p_sleep_w=0.0)
MACRO_PM = PowerModel(pa_efficiency=0.213, p_active_w=233.2, p_sleep_w=150.0)


# -- water filling ----------------------------------------------------------------


def test_single_slot_closed_form():
    nu, powers, support = water_fill(np.array([1.0]), math.log(2))
    assert nu == pytest.approx(2.0, rel=1e-14)
    assert powers[0] == pytest.approx(1.0, rel=1e-14)
    assert support == 1


def test_symmetric_slots():
    nu, powers, support = water_fill(np.array([math.e, math.e]), 2.0)
    assert nu == pytest.approx(1.0, rel=1e-14)
    np.testing.assert_allclose(powers, 1.0 - 1.0 / math.e, rtol=1e-14)
    assert support == 2


def test_weak_slot_dropped():
    # naive two-slot level sqrt(2) would give the weak slot negative power
    nu, powers, support = water_fill(np.array([10.0, 0.1]), math.log(2))
    assert support == 1
    assert nu == pytest.approx(0.2, rel=1e-12)
    np.testing.assert_allclose(powers, [0.1, 0.0], atol=1e-15)
    assert math.log1p(10.0 * powers[0]) == pytest.approx(math.log(2), rel=1e-12)


def test_powers_follow_input_order():
    nu, powers, _ = water_fill(np.array([0.1, 10.0]), math.log(2))
    np.testing.assert_allclose(powers, [0.0, 0.1], atol=1e-15)


def test_water_fill_rejects_bad_input():
    with pytest.raises(ValueError):
        water_fill(np.array([]), 1.0)
    with pytest.raises(ValueError):
        water_fill(np.array([1.0, -2.0]), 1.0)
    with pytest.raises(ValueError):
        water_fill(np.array([1.0]), 0.0)


def test_rate_met_exactly_on_random_instances():
    rng = np.random.default_rng(21)
    for _ in range(100):
        gains = rng.lognormal(0.0, 1.5, rng.integers(1, 40))
        rate = float(rng.uniform(0.1, 30.0))
        nu, powers, support = water_fill(gains, rate)
        delivered = float(np.sum(np.log1p(gains * powers)))
        assert abs(delivered - rate) / rate < 1e-12
        assert np.count_nonzero(powers > 0.0) == support
        level_ref, kept_ref = reference_water_fill(gains, rate)
        assert nu == pytest.approx(level_ref, rel=1e-12)
        assert support == len(kept_ref)


# -- fixed-N solve ------------------------------------------------------------------


def test_all_slots_eligible_when_N_is_T():
    gains = np.array([5.0, 3.0, 1.0, 0.5])
    sol = solve_given_N(gains, 4, 1.0, TOY_PM, 1.0)
    assert sol.threshold == 0.5
    assert sol.schedule.all()


def test_single_best_slot_inversion():
    gains = np.array([5.0, 3.0, 1.0])
    rate = 2.0
    sol = solve_given_N(gains, 1, rate, MACRO_PM, 0.01)
    p = (math.exp(rate) - 1.0) / 5.0
    assert sol.powers_w[0] == pytest.approx(p, rel=1e-12)
    expected = 0.01 * (
        p / MACRO_PM.pa_efficiency
        + (MACRO_PM.p_active_w - MACRO_PM.p_sleep_w)
        + 3 * MACRO_PM.p_sleep_w
    )
    assert sol.total_energy_j == pytest.approx(expected, rel=1e-12)


def test_transmit_power_nonincreasing_in_N():
    rng = np.random.default_rng(34)
    for _ in range(100):
        gains = np.sort(rng.lognormal(1.0, 1.0, 12))[::-1]
        rate = float(rng.uniform(0.5, 20.0))
        sums = [
            solve_given_N(gains, n, rate, TOY_PM, 1.0).powers_w.sum()
            for n in range(1, 13)
        ]
        assert all(a >= b - 1e-9 * abs(a) for a, b in zip(sums, sums[1:]))


def test_solve_given_N_requires_sorted():
    with pytest.raises(ValueError):
        solve_given_N(np.array([1.0, 2.0]), 1, 1.0, TOY_PM, 1.0)


# -- full sweep ---------------------------------------------------------------------


def test_toy_instance_matches_subset_enumeration():
    gains = [5.0, 3.0, 1.0, 0.5]
    sol = optimize(make_trace(gains), 1.0, TOY_PM, 1.0)
    oracle = brute_force_min_energy(gains, 1.0, 1.0, 1.0, 0.0, 1.0)
    assert sol.total_energy_j == pytest.approx(oracle, rel=1e-12)


def test_optimizer_matches_oracle_on_random_instances():
    rng = np.random.default_rng(77)
    for _ in range(100):
        n = int(rng.integers(2, 9))
        gains = list(rng.lognormal(0.0, 1.2, n))
        rate = float(rng.uniform(0.2, 8.0))
        pa_eff = float(rng.uniform(0.2, 1.0))
        p_sleep = float(rng.uniform(0.0, 3.0))
        p_active = p_sleep + float(rng.uniform(0.0, 5.0))
        dt = float(rng.uniform(0.001, 1.0))
        pm = PowerModel(pa_eff, p_active, p_sleep)
        sol = optimize(make_trace(gains), rate, pm, dt)
        oracle = brute_force_min_energy(gains, rate, pa_eff, p_active, p_sleep, dt)
        assert sol.total_energy_j == pytest.approx(oracle, rel=1e-9)


def test_free_activity_makes_full_window_optimal():
    # with no circuit penalty, using every slot is (one of) the optima
    pm = PowerModel(0.5, 2.0, 2.0)
    gains = [4.0, 2.5, 1.5, 0.8, 0.3]
    trace = make_trace(gains)
    sol = optimize(trace, 3.0, pm, 1.0)
    full = solve_given_N(np.sort(gains)[::-1], 5, 3.0, pm, 1.0)
    assert sol.total_energy_j == pytest.approx(full.total_energy_j, rel=1e-12)


def test_schedule_invariant_under_gain_scaling():
    # zero circuit terms: scaling all gains rescales powers but not the schedule
    pm = PowerModel(1.0, 0.0, 0.0)
    rng = np.random.default_rng(5)
    for _ in range(20):
        gains = rng.lognormal(0.0, 1.0, 8)
        s1 = optimize(make_trace(gains), 2.0, pm, 1.0)
        s2 = optimize(make_trace(gains * 7.3), 2.0, pm, 1.0)
        np.testing.assert_array_equal(s1.schedule, s2.schedule)


def test_remark_dichotomy_and_threshold_order_statistic():
    rng = np.random.default_rng(90)
    for _ in range(50):
        gains = rng.lognormal(0.5, 1.0, 30)
        rate = float(rng.uniform(1.0, 40.0))
        trace = make_trace(gains)
        for n in (1, 5, 17, 30):
            sol = solve_given_N(np.sort(gains)[::-1], n, rate, TOY_PM, 1.0)
            full_support = sol.n_positive_power == sol.n_active
            assert full_support == (sol.water_level * sol.threshold >= 1.0 - 1e-12)
            assert sol.threshold == np.sort(gains)[::-1][n - 1]
        sol = optimize(trace, rate, TOY_PM, 1.0)
        assert sol.threshold == np.sort(gains)[::-1][sol.n_active - 1]


def test_rate_feasibility_of_returned_solutions():
    rng = np.random.default_rng(41)
    for _ in range(30):
        gains = rng.lognormal(0.0, 1.0, 25)
        rate = float(rng.uniform(0.5, 25.0))
        sol = optimize(make_trace(gains), rate, MACRO_PM, 0.01)
        assert sol.delivered_nats(np.asarray(gains)) == pytest.approx(rate, rel=1e-9)


def test_threshold_ties_scheduled_lowest_index_first():
    gains = np.array([2.0, 1.0, 1.0, 1.0, 0.2])
    sorted_desc = np.sort(gains)[::-1]
    trace = make_trace(gains)
    # force N=3: ties at gain 1.0 must pick slots 1 and 2, not slot 3
    sol_sorted = solve_given_N(sorted_desc, 3, 2.0, TOY_PM, 1.0)
    assert sol_sorted.threshold == 1.0
    sol = optimize(trace, 6.0, PowerModel(1.0, 0.0, 0.0), 1.0)
    if sol.n_active in (2, 3):
        scheduled = np.flatnonzero(sol.schedule)
        assert scheduled[0] == 0
        assert all(np.diff(scheduled) >= 1)
        # the tied gains enter in slot order
        tied = [i for i in scheduled if gains[i] == 1.0]
        assert tied == sorted(tied)


# -- energy accounting -----------------------------------------------------------------


def test_all_idle_energy():
    sol = AllocationSolution(
        n_active=0,
        active_ratio=0.0,
        threshold=math.inf,
        water_level=1.0,
        n_positive_power=0,
        powers_w=np.zeros(100),
        schedule=np.zeros(100, bool),
        total_energy_j=0.0,
    )
    assert total_energy(sol, MACRO_PM, 0.01) == pytest.approx(150.0, rel=1e-12)


def test_single_active_slot_supply_power():
    powers = np.zeros(10)
    powers[3] = 21.3
    schedule = np.zeros(10, bool)
    schedule[3] = True
    sol = AllocationSolution(1, 0.1, 1.0, 1.0, 1, powers, schedule, 0.0)
    # active slot draws 21.3/0.213 + 233.2 = 333.2 W; the rest sleep at 150 W
    expected = (333.2 + 9 * 150.0) * 0.01
    assert total_energy(sol, MACRO_PM, 0.01) == pytest.approx(expected, rel=1e-12)


def test_pure_transmit_energy():
    powers = np.array([1.0, 2.0, 0.0])
    schedule = np.array([True, True, False])
    sol = AllocationSolution(2, 2 / 3, 1.0, 1.0, 2, powers, schedule, 0.0)
    pm = PowerModel(1.0, 0.0, 0.0)
    assert total_energy(sol, pm, 0.5) == pytest.approx(1.5, rel=1e-14)
