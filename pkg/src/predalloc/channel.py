"""Channel model: trajectories, path-loss gains, Gamma fading, per-slot equivalent gains.

The user moves along a road modeled as a line parallel to a row of base
stations; each frame gets one large-scale power gain from the distance to the
nearest BS, and each slot multiplies it by an i.i.d. small-scale Gamma fade.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

# Path loss in dB at distance d meters: PL_REF_DB + PL_SLOPE_DB * log10(d)
PL_REF_DB = 35.3
PL_SLOPE_DB = 37.6

# Distances below this are clamped (a user never stands inside the antenna).
MIN_DISTANCE_M = 1.0


@dataclass(frozen=True)
class SystemConfig:
    """Physical and protocol constants. All linear units (W, Hz, s, bits)."""

    n_antennas: int = 4            # BS transmit antennas
    frames: int = 120              # number of frames in the deadline window
    slots_per_frame: int = 100     # slots per frame
    slot_duration_s: float = 0.01  # slot length [s]
    file_bits: float = 2e9         # payload to deliver before the deadline [bits]
    bandwidth_hz: float = 10e6     # system bandwidth [Hz]
    noise_power_w: float = 10 ** (-95.0 / 10.0) * 1e-3  # -95 dBm in watts
    cell_radius_m: float = 250.0   # cell radius D [m]; BS spacing is 2*D
    max_tx_power_w: float = 40.0   # transmit power cap for online policies [W]
    pa_efficiency: float = 0.213   # power-amplifier efficiency
    p_active_w: float = 233.2      # circuit power, BS active [W]
    p_sleep_w: float = 150.0       # circuit power, BS asleep [W]
    rng_seed: int = 1

    def __post_init__(self):
        if self.frames < 1 or self.slots_per_frame < 1:
            raise ValueError("frames and slots_per_frame must be >= 1")
        if not 0.0 < self.pa_efficiency <= 1.0:
            raise ValueError("pa_efficiency must be in (0, 1]")
        if not self.p_active_w >= self.p_sleep_w >= 0.0:
            raise ValueError("need p_active_w >= p_sleep_w >= 0")
        if self.noise_power_w <= 0.0:
            raise ValueError("noise_power_w must be positive")
        if self.file_bits <= 0.0:
            raise ValueError("file_bits must be positive")
        if self.slot_duration_s <= 0.0 or self.bandwidth_hz <= 0.0:
            raise ValueError("slot_duration_s and bandwidth_hz must be positive")
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be >= 1")

    @property
    def total_slots(self) -> int:
        return self.frames * self.slots_per_frame

    @property
    def frame_duration_s(self) -> float:
        return self.slots_per_frame * self.slot_duration_s

    @property
    def rate_requirement_nats(self) -> float:
        """Total nats of ln(1 + g p) the scheduled slots must deliver.

        Per-slot rate over bandwidth W and slot length dt is W*dt*ln(1+gp)
        nats, so delivering file_bits*ln2 nats requires the per-slot ln terms
        to sum to file_bits*ln2 / (W*dt).
        """
        return self.file_bits * math.log(2) / (self.bandwidth_hz * self.slot_duration_s)


def with_slots_per_frame(cfg: SystemConfig, slots_per_frame: int) -> SystemConfig:
    """Rescale slot granularity keeping the frame duration fixed.

    E.g. 100 slots of 10 ms and 1000 slots of 1 ms are the same 1 s frame.
    """
    frame_s = cfg.frame_duration_s
    return replace(
        cfg,
        slots_per_frame=slots_per_frame,
        slot_duration_s=frame_s / slots_per_frame,
    )


@dataclass(frozen=True)
class TrajectoryConfig:
    """User movement over the deadline window.

    kind 'straight_line' moves parallel to the BS row at a fixed offset;
    'cosine_perturbed' adds a perpendicular cosine wobble of amplitude_m
    meters and period cycle_s seconds (models lane changes / location error).
    speed_mps=None means the caller draws it uniform on (0, 20) m/s.
    """

    kind: str = "straight_line"
    min_bs_distance_m: float = 150.0
    amplitude_m: float = 0.0
    cycle_s: float = math.pi
    speed_mps: float | None = None

    def __post_init__(self):
        if self.kind not in ("straight_line", "cosine_perturbed"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.amplitude_m < 0.0:
            raise ValueError("amplitude_m must be >= 0")
        if self.kind == "straight_line" and self.amplitude_m != 0.0:
            raise ValueError("straight_line forces amplitude_m = 0")
        if self.cycle_s <= 0.0:
            raise ValueError("cycle_s must be positive")


@dataclass(frozen=True)
class ChannelTrace:
    """One realization: per-frame large-scale gains and per-slot equivalent gains."""

    large_scale_per_frame: np.ndarray   # linear power gains, length T_f
    equivalent_gain_per_slot: np.ndarray  # g_t = alpha_frame * fade / noise, length T
    slots_per_frame: int = field(default=1)

    def __post_init__(self):
        alphas = np.asarray(self.large_scale_per_frame, float)
        gains = np.asarray(self.equivalent_gain_per_slot, float)
        if not (np.all(np.isfinite(alphas)) and np.all(alphas > 0)):
            raise ValueError("large-scale gains must be positive and finite")
        if not (np.all(np.isfinite(gains)) and np.all(gains > 0)):
            raise ValueError("equivalent gains must be positive and finite")
        if gains.size != alphas.size * self.slots_per_frame:
            raise ValueError("slot count must equal frames * slots_per_frame")
        object.__setattr__(self, "large_scale_per_frame", alphas)
        object.__setattr__(self, "equivalent_gain_per_slot", gains)

    @property
    def total_slots(self) -> int:
        return self.equivalent_gain_per_slot.size


def path_loss_gain(distance_m):
    """Linear power gain 10^(-(35.3 + 37.6 log10 d)/10) at distance d meters."""
    d = np.asarray(distance_m, float)
    if np.any(d <= 0.0):
        raise ValueError("distance must be positive")
    gain = 10.0 ** (-(PL_REF_DB + PL_SLOPE_DB * np.log10(d)) / 10.0)
    if np.ndim(distance_m) == 0:
        return float(gain)
    return gain


def default_bs_layout(x_min_m: float, x_max_m: float, cell_radius_m: float) -> np.ndarray:
    """Row of BSs on the x-axis, spaced 2*D apart, covering [x_min, x_max]."""
    spacing = 2.0 * cell_radius_m
    lo = math.floor(x_min_m / spacing) - 1
    hi = math.ceil(x_max_m / spacing) + 1
    xs = np.arange(lo, hi + 1) * spacing
    return np.column_stack([xs, np.zeros_like(xs)])


def generate_trajectory(
    cfg: TrajectoryConfig,
    sys: SystemConfig,
    bs_layout: np.ndarray,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Per-frame 2-D user positions (one sample at each frame start).

    The user travels along y = min_bs_distance_m parallel to the BS row;
    cosine_perturbed adds the perpendicular wobble. When cfg.speed_mps is
    None a speed is drawn uniform on (0, 20) m/s from rng.
    """
    bs_layout = np.asarray(bs_layout, float)
    if bs_layout.size == 0:
        raise ValueError("bs_layout must be non-empty")
    speed = cfg.speed_mps
    if speed is None:
        if rng is None:
            raise ValueError("speed_mps unset and no rng given to draw it")
        speed = float(rng.uniform(0.0, 20.0))
    elapsed = np.arange(sys.frames) * sys.frame_duration_s
    x = speed * elapsed
    y = np.full(sys.frames, cfg.min_bs_distance_m, float)
    if cfg.kind == "cosine_perturbed":
        y = y + cfg.amplitude_m * np.cos(2.0 * math.pi * elapsed / cfg.cycle_s)
    return np.column_stack([x, y])


def large_scale_gains(positions: np.ndarray, bs_layout: np.ndarray) -> np.ndarray:
    """Per-frame gain from the nearest BS (ties -> lowest BS index).

    Distances below 1 m are clamped to 1 m.
    """
    pos = np.atleast_2d(np.asarray(positions, float))
    bs = np.atleast_2d(np.asarray(bs_layout, float))
    # (frames, n_bs) distance matrix; argmin returns the first (lowest) index on ties
    diff = pos[:, None, :] - bs[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    nearest = dist[np.arange(pos.shape[0]), np.argmin(dist, axis=1)]
    return path_loss_gain(np.maximum(nearest, MIN_DISTANCE_M))


def sample_small_scale(rng: np.random.Generator, n_antennas: int, count: int) -> np.ndarray:
    """i.i.d. squared-norm fades: Gamma(shape=n_antennas, scale=1) draws."""
    if n_antennas < 1:
        raise ValueError("n_antennas must be >= 1")
    if count < 0:
        raise ValueError("count must be >= 0")
    return rng.gamma(shape=float(n_antennas), scale=1.0, size=count)


def equivalent_gains(
    alphas: np.ndarray,
    small: np.ndarray,
    noise_power_w: float,
    slots_per_frame: int,
) -> np.ndarray:
    """Per-slot g_t = alpha of the slot's frame * fade_t / noise power."""
    alphas = np.asarray(alphas, float)
    small = np.asarray(small, float)
    if small.size != alphas.size * slots_per_frame:
        raise ValueError(
            f"need {alphas.size * slots_per_frame} fades for "
            f"{alphas.size} frames x {slots_per_frame} slots, got {small.size}"
        )
    return np.repeat(alphas, slots_per_frame) * small / noise_power_w


def simulate_trace(sys: SystemConfig, alphas: np.ndarray, rng: np.random.Generator) -> ChannelTrace:
    """Draw fresh fades for every slot and assemble the trace."""
    alphas = np.asarray(alphas, float)
    fades = sample_small_scale(rng, sys.n_antennas, alphas.size * sys.slots_per_frame)
    gains = equivalent_gains(alphas, fades, sys.noise_power_w, sys.slots_per_frame)
    return ChannelTrace(alphas, gains, sys.slots_per_frame)
