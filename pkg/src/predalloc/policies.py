"""Online transmission policies over a realized trace, with energy accounting.

Every policy maps each slot's gain to a transmit power using only that slot's
gain plus pre-computed plan parameters, stops as soon as the payload is
delivered (final slot's power rate-inverted so nothing is over-delivered),
and falls back to max-power slots after the deadline if bits remain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .channel import ChannelTrace, SystemConfig
from .offline import PowerModel


# A slot counts as completing delivery when the cumulative rate is within
# this relative tolerance of the target; without it, cumsum rounding can
# push an exactly-planned delivery into a spurious fallback slot.
_COMPLETION_RTOL = 1e-12


@dataclass(frozen=True)
class PolicyOutcome:
    energy_j: float
    bits_delivered: float
    slots_used: int          # active slots, overtime included
    deadline_met: bool
    overtime_slots: int
    cap_hit_slots: int       # in-window slots where the power cap bound
    per_slot_log: tuple | None = None  # (active, power_w, rate_nats) arrays


def _finish(
    sys: SystemConfig,
    active: np.ndarray,
    powers: np.ndarray,
    rates: np.ndarray,
    trace: ChannelTrace,
    overtime_rng: np.random.Generator | None,
    cap_hits: int,
    keep_log: bool,
    cap: float,
) -> PolicyOutcome:
    """Shared epilogue: early stop / final-slot reduction / fallback / energy."""
    gains = trace.equivalent_gain_per_slot
    t_total = gains.size
    nats_per_bit = math.log(2)
    target_nats = sys.file_bits * nats_per_bit
    slot_nats = sys.bandwidth_hz * sys.slot_duration_s

    cum = np.cumsum(rates)
    stop = int(np.searchsorted(cum, target_nats * (1.0 - _COMPLETION_RTOL), side="left"))
    pm = PowerModel.from_system(sys)

    overtime = 0
    extra_energy = 0.0
    if stop >= t_total:
        # deadline missed: finish after the window at max power
        residual_nats = target_nats - (cum[-1] if t_total else 0.0)
        residual_bits = residual_nats / nats_per_bit
        if overtime_rng is None:
            raise ValueError("deadline missed but no overtime rng supplied")
        gen = _overtime_gains(overtime_rng, trace.large_scale_per_frame[-1], sys)
        extra_energy, overtime = max_power_fallback(gen, residual_bits, sys)
        met = False
    else:
        met = True
        prev = cum[stop - 1] if stop > 0 else 0.0
        residual = target_nats - prev
        # rate-invert the closing slot so delivery is exact (cap still binds)
        powers[stop] = min(math.expm1(residual / slot_nats) / gains[stop], cap)
        rates[stop] = residual
        powers[stop + 1 :] = 0.0
        rates[stop + 1 :] = 0.0
        active[stop + 1 :] = False
        active[stop] = True

    energy = float(np.sum(pm.slot_power_w(powers, active)) * sys.slot_duration_s)
    energy += extra_energy
    delivered = sys.file_bits  # exact by final-slot inversion / fallback closure
    log = (active.copy(), powers.copy(), rates.copy()) if keep_log else None
    return PolicyOutcome(
        energy_j=energy,
        bits_delivered=delivered,
        slots_used=int(np.count_nonzero(active)) + overtime,
        deadline_met=met,
        overtime_slots=overtime,
        cap_hit_slots=cap_hits,
        per_slot_log=log,
    )


def run_threshold_waterfill(
    trace: ChannelTrace,
    nu: float,
    g_th: float,
    sys: SystemConfig,
    overtime_rng: np.random.Generator | None = None,
    max_tx_power_w: float | None = None,
    keep_log: bool = False,
) -> PolicyOutcome:
    """Activate slots whose gain clears g_th; power nu - 1/g where positive.

    Powers are capped at the transmit limit. g_th may be +inf (never
    transmit in-window; everything goes to the fallback).
    """
    if nu <= 0.0 or g_th < 0.0:
        raise ValueError("need nu > 0 and g_th >= 0")
    cap = sys.max_tx_power_w if max_tx_power_w is None else max_tx_power_w
    gains = trace.equivalent_gain_per_slot
    active = gains >= g_th
    raw = np.where(active & (gains * nu > 1.0), nu - 1.0 / gains, 0.0)
    powers = np.minimum(raw, cap)
    cap_hits = int(np.count_nonzero(raw > cap))
    rates = sys.bandwidth_hz * sys.slot_duration_s * np.log1p(gains * powers)
    return _finish(sys, active, powers, rates, trace, overtime_rng, cap_hits, keep_log, cap)


def run_se_policy(
    trace: ChannelTrace,
    sys: SystemConfig,
    overtime_rng: np.random.Generator | None = None,
    keep_log: bool = False,
) -> PolicyOutcome:
    """Max transmit power every slot until done (rate-greedy baseline)."""
    gains = trace.equivalent_gain_per_slot
    active = np.ones(gains.size, bool)
    powers = np.full(gains.size, sys.max_tx_power_w)
    rates = sys.bandwidth_hz * sys.slot_duration_s * np.log1p(gains * powers)
    return _finish(sys, active, powers, rates, trace, overtime_rng, 0, keep_log, sys.max_tx_power_w)


def run_ee_policy(
    trace: ChannelTrace,
    sys: SystemConfig,
    overtime_rng: np.random.Generator | None = None,
    keep_log: bool = False,
) -> PolicyOutcome:
    """Per-slot rate-per-supply-watt maximizing power until done."""
    gains = trace.equivalent_gain_per_slot
    active = np.ones(gains.size, bool)
    powers = _ee_power_vec(gains, sys)
    rates = sys.bandwidth_hz * sys.slot_duration_s * np.log1p(gains * powers)
    return _finish(sys, active, powers, rates, trace, overtime_rng, 0, keep_log, sys.max_tx_power_w)


def ee_optimal_power(g: float, sys: SystemConfig) -> float:
    """Power in [0, p_max] maximizing ln(1+gp) / (p/xi + p_active).

    The ratio is quasi-concave; its stationarity condition reduces to
    (1+x)ln(1+x) - x = xi*g*p_active in x = g*p, which is strictly
    increasing, so a bracketed bisection on x is exact.
    """
    if g <= 0.0:
        raise ValueError("gain must be positive")
    return float(_ee_power_vec(np.array([g]), sys)[0])


def _ee_power_vec(gains: np.ndarray, sys: SystemConfig) -> np.ndarray:
    target = sys.pa_efficiency * sys.p_active_w * gains
    # bracket the root of (1+x)ln(1+x) - x = target
    hi = np.ones_like(gains)
    for _ in range(200):
        val = (1.0 + hi) * np.log1p(hi) - hi
        grow = val < target
        if not np.any(grow):
            break
        hi = np.where(grow, hi * 2.0, hi)
    lo = np.zeros_like(gains)
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        val = (1.0 + mid) * np.log1p(mid) - mid
        below = val < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    x = 0.5 * (lo + hi)
    return np.minimum(x / gains, sys.max_tx_power_w)


def max_power_fallback(
    trace_extension: Iterable[float], residual_bits: float, sys: SystemConfig
) -> tuple[float, int]:
    """Post-deadline max-power slots until the residual is delivered.

    trace_extension yields post-deadline equivalent gains (fresh fades on the
    final frame's large-scale gain). The closing slot's power is rate-
    inverted like the in-window policies. Returns (extra energy J, slots).
    """
    if residual_bits <= 0.0:
        return 0.0, 0
    residual = residual_bits * math.log(2)
    slot_nats = sys.bandwidth_hz * sys.slot_duration_s
    pm = PowerModel.from_system(sys)
    energy = 0.0
    slots = 0
    for g in trace_extension:
        rate = slot_nats * math.log1p(g * sys.max_tx_power_w)
        if rate >= residual:
            p = math.expm1(residual / slot_nats) / g
            energy += float(pm.slot_power_w(p, True)) * sys.slot_duration_s
            return energy, slots + 1
        residual -= rate
        energy += float(pm.slot_power_w(sys.max_tx_power_w, True)) * sys.slot_duration_s
        slots += 1
    raise ValueError("trace extension exhausted before the residual was delivered")


def _overtime_gains(
    rng: np.random.Generator, alpha: float, sys: SystemConfig
) -> Iterator[float]:
    """Endless post-deadline gains: last frame's alpha, fresh fades."""
    while True:
        fades = rng.gamma(shape=float(sys.n_antennas), scale=1.0, size=sys.slots_per_frame)
        yield from alpha * fades / sys.noise_power_w
