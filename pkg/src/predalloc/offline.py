"""Offline energy-minimal plan for delivering a fixed payload over a known trace.

Given every slot's equivalent gain, the optimal plan activates the N slots
with the largest gains and water-fills transmit power over them; N is swept
to trade amplifier energy against circuit-activity energy. The sweep runs in
O(T log T) via prefix sums over the descending-sorted gains: the positive-
power support of a water-fill is always a prefix of that order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelTrace, SystemConfig

# Water levels needing exp() beyond this log magnitude overflow float64;
# such candidate plans are treated as infinitely expensive.
_EXP_OVERFLOW = 700.0


@dataclass(frozen=True)
class PowerModel:
    """Supply-power accounting: p_total = p/efficiency + active circuit + sleep."""

    pa_efficiency: float
    p_active_w: float
    p_sleep_w: float

    def __post_init__(self):
        if not 0.0 < self.pa_efficiency <= 1.0:
            raise ValueError("pa_efficiency must be in (0, 1]")
        if not self.p_active_w >= self.p_sleep_w >= 0.0:
            raise ValueError("need p_active_w >= p_sleep_w >= 0")

    @classmethod
    def from_system(cls, sys: SystemConfig) -> "PowerModel":
        return cls(sys.pa_efficiency, sys.p_active_w, sys.p_sleep_w)

    def slot_power_w(self, tx_power_w, active) -> np.ndarray:
        """Total supply power per slot for given transmit power and activity."""
        tx = np.asarray(tx_power_w, float)
        act = np.asarray(active, bool)
        return tx / self.pa_efficiency + act * (self.p_active_w - self.p_sleep_w) + self.p_sleep_w


@dataclass(frozen=True)
class AllocationSolution:
    """One plan: which slots are active, their powers, and the two controlling
    parameters (threshold and water level) the plan is built from."""

    n_active: int             # N: slots with the BS switched on
    active_ratio: float       # N / T
    threshold: float          # smallest gain among the active slots
    water_level: float        # nu: p = nu - 1/g on positive-power slots
    n_positive_power: int     # L <= N: slots actually transmitting
    powers_w: np.ndarray      # per-slot transmit power, length T
    schedule: np.ndarray      # per-slot activity mask, length T
    total_energy_j: float

    def delivered_nats(self, gains: np.ndarray) -> float:
        """Sum of ln(1 + g p) over the schedule, for feasibility checks."""
        active = self.schedule
        return float(np.sum(np.log1p(gains[active] * self.powers_w[active])))


def water_fill(selected_gains: np.ndarray, rate_nats: float) -> tuple[float, np.ndarray, int]:
    """Minimal-power water-filling meeting sum ln(1 + p g) = rate_nats exactly.

    Slots whose gain sits below the inverse water level get zero power; the
    level is recomputed over the survivors until all retained slots are
    positive. Returns (level, per-slot powers in input order, support size).
    """
    gains = np.asarray(selected_gains, float)
    if gains.size == 0:
        raise ValueError("need at least one gain")
    if np.any(gains <= 0.0) or rate_nats <= 0.0:
        raise ValueError("gains and rate must be positive")
    gs = np.sort(gains)[::-1]
    level, support = _prefix_water_level(gs, np.cumsum(np.log(gs)), rate_nats)
    powers = np.where(gains * level > 1.0, level - 1.0 / gains, 0.0)
    return level, powers, support


def _prefix_water_level(
    gains_desc: np.ndarray, prefix_log: np.ndarray, rate_nats: float
) -> tuple[float, int]:
    """Water level and support size over the top-L prefix of sorted gains.

    The support is the largest L with sum_{i<L} ln(g_i / g_{L-1}) < rate:
    that sum is non-decreasing in L, so a single searchsorted finds it.
    """
    n = gains_desc.size
    counts = np.arange(1, n + 1)
    slack = prefix_log - counts * np.log(gains_desc)
    support = int(np.searchsorted(slack, rate_nats, side="left"))
    support = max(support, 1)
    level = float(np.exp((rate_nats - prefix_log[support - 1]) / support))
    return level, support


def solve_given_N(
    gains_desc_sorted: np.ndarray,
    n_active: int,
    rate_nats: float,
    power_model: PowerModel,
    slot_duration_s: float,
) -> AllocationSolution:
    """Plan with exactly the top n_active slots switched on (input order kept).

    The input must be sorted descending; the returned arrays are in that
    same order.
    """
    gs = np.asarray(gains_desc_sorted, float)
    t_total = gs.size
    if not 1 <= n_active <= t_total:
        raise ValueError("n_active must be in [1, T]")
    if np.any(np.diff(gs) > 0.0):
        raise ValueError("gains must be sorted descending")
    level, powers, support = water_fill(gs[:n_active], rate_nats)
    full_powers = np.zeros(t_total)
    full_powers[:n_active] = powers
    schedule = np.zeros(t_total, bool)
    schedule[:n_active] = True
    energy = float(
        np.sum(power_model.slot_power_w(full_powers, schedule)) * slot_duration_s
    )
    return AllocationSolution(
        n_active=n_active,
        active_ratio=n_active / t_total,
        threshold=float(gs[n_active - 1]),
        water_level=level,
        n_positive_power=support,
        powers_w=full_powers,
        schedule=schedule,
        total_energy_j=energy,
    )


def optimize(
    trace: ChannelTrace,
    rate_nats: float,
    power_model: PowerModel,
    slot_duration_s: float,
) -> AllocationSolution:
    """Exhaustive sweep of the active-slot count; returns the cheapest plan.

    Arrays in the returned solution are in original slot order. Ties in
    energy resolve to the smallest N; gain ties at the threshold admit the
    lowest slot index first.
    """
    gains = trace.equivalent_gain_per_slot
    t_total = gains.size
    order = np.argsort(-gains, kind="stable")
    gs = gains[order]
    prefix_log = np.cumsum(np.log(gs))
    prefix_inv = np.cumsum(1.0 / gs)
    counts = np.arange(1, t_total + 1)

    slack = prefix_log - counts * np.log(gs)
    support_max = max(int(np.searchsorted(slack, rate_nats, side="left")), 1)

    # per candidate N: support L = min(N, support_max), level from the prefix
    support = np.minimum(counts, support_max)
    log_level = (rate_nats - prefix_log[support - 1]) / support
    with np.errstate(over="ignore"):
        level = np.exp(np.minimum(log_level, _EXP_OVERFLOW + 1.0))
    sum_tx = support * level - prefix_inv[support - 1]
    sum_tx[log_level > _EXP_OVERFLOW] = np.inf

    energy = (
        sum_tx / power_model.pa_efficiency
        + counts * (power_model.p_active_w - power_model.p_sleep_w)
        + t_total * power_model.p_sleep_w
    ) * slot_duration_s
    best_n = int(np.argmin(energy)) + 1

    sorted_solution = solve_given_N(gs, best_n, rate_nats, power_model, slot_duration_s)
    powers = np.zeros(t_total)
    schedule = np.zeros(t_total, bool)
    powers[order] = sorted_solution.powers_w
    schedule[order] = sorted_solution.schedule
    return AllocationSolution(
        n_active=sorted_solution.n_active,
        active_ratio=sorted_solution.active_ratio,
        threshold=sorted_solution.threshold,
        water_level=sorted_solution.water_level,
        n_positive_power=sorted_solution.n_positive_power,
        powers_w=powers,
        schedule=schedule,
        total_energy_j=sorted_solution.total_energy_j,
    )


def total_energy(
    solution: AllocationSolution, power_model: PowerModel, slot_duration_s: float
) -> float:
    """Joules over the window: per-slot supply power times slot length."""
    return float(
        np.sum(power_model.slot_power_w(solution.powers_w, solution.schedule))
        * slot_duration_s
    )
