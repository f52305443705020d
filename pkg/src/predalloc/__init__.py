"""Energy-saving predictive resource allocation.

Offline water-filling planner over a known fading trace, Gamma-mixture law
of the equivalent gains, large-scale-only parameter estimators, online
policies with deadline fallback, and a reproducible Monte Carlo harness.
"""

from .channel import (
    ChannelTrace,
    SystemConfig,
    TrajectoryConfig,
    default_bs_layout,
    equivalent_gains,
    generate_trajectory,
    large_scale_gains,
    path_loss_gain,
    sample_small_scale,
    simulate_trace,
    with_slots_per_frame,
)
from .configio import ConfigError
from .estimator import (
    ConservativePlan,
    EstimationError,
    KappaEstimates,
    LargeScaleEstimator,
    NuStats,
    ThresholdStats,
)
from .gaindist import GainDistribution, QuadratureError
from .harness import ExperimentConfig, TrialRecord, write_csv
from .offline import AllocationSolution, PowerModel, optimize, solve_given_N, total_energy, water_fill
from .policies import (
    PolicyOutcome,
    ee_optimal_power,
    max_power_fallback,
    run_ee_policy,
    run_se_policy,
    run_threshold_waterfill,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationSolution",
    "ChannelTrace",
    "ConfigError",
    "ConservativePlan",
    "EstimationError",
    "ExperimentConfig",
    "GainDistribution",
    "KappaEstimates",
    "LargeScaleEstimator",
    "NuStats",
    "PolicyOutcome",
    "PowerModel",
    "QuadratureError",
    "SystemConfig",
    "ThresholdStats",
    "TrajectoryConfig",
    "TrialRecord",
    "default_bs_layout",
    "ee_optimal_power",
    "equivalent_gains",
    "generate_trajectory",
    "large_scale_gains",
    "max_power_fallback",
    "optimize",
    "path_loss_gain",
    "run_ee_policy",
    "run_se_policy",
    "run_threshold_waterfill",
    "sample_small_scale",
    "simulate_trace",
    "solve_given_N",
    "total_energy",
    "water_fill",
    "with_slots_per_frame",
    "write_csv",
]
