"""Plan parameters estimated from large-scale gains only.

With the mixture law of the equivalent gains in hand, the threshold at a
given active ratio is its tail quantile (asymptotically normal across finite
windows) and the water level is asymptotically log-normal with moments built
from tail-truncated log-gain integrals. Together they yield the mean transmit
and total supply power per slot, the energy-optimal active ratio, and
deadline-safe two-sigma parameter estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .gaindist import GainDistribution
from .offline import PowerModel

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

# Water levels above exp(700) overflow float64; treat as +inf cost.
_EXP_OVERFLOW = 700.0


class EstimationError(RuntimeError):
    """Root-finding for the clamping boundary failed; carries diagnostics."""


@dataclass(frozen=True)
class ThresholdStats:
    mu: float      # tail quantile at the requested active ratio
    sigma: float   # asymptotic std of the realized threshold over T slots


@dataclass(frozen=True)
class NuStats:
    """Log-normal water-level statistics at a given active ratio.

    When the raw active ratio would push the water level below the inverse
    threshold (so extra active slots get zero power), the statistics are
    evaluated at the clamped ratio where level * threshold = 1 and
    case2_clamped is set; kappa_eff carries that ratio.
    """

    mu_nu: float
    sigma_nu: float
    log_mean: float
    log_sd: float
    case2_clamped: bool
    kappa_eff: float


@dataclass(frozen=True)
class KappaEstimates:
    """Everything the large-scale-only planner knows at one active ratio."""

    kappa: float
    mu_gth: float
    sigma_gth: float
    mu_phi: float       # tail-conditioned mean of ln G (at kappa_eff)
    sigma_phi: float    # std of the averaged log-gain over the active slots
    mu_nu: float
    sigma_nu: float
    mu_g_inv: float     # tail-conditioned mean of 1/G (at kappa_eff)
    mu_psi_p: float     # mean transmit power per slot
    mu_omega: float     # mean total supply power per slot
    case2_clamped: bool


@dataclass(frozen=True)
class ConservativePlan:
    """Two-sigma-shifted parameters: threshold lowered, water level raised,
    so the payload completes before the deadline with ~95% probability."""

    kappa_star: float
    g_th_hat: float
    nu_hat: float
    target_completion_prob: float = 0.9506


class LargeScaleEstimator:
    """All large-scale-only estimates for one (distribution, T, rate) triple.

    Queries are pure; the clamping boundary is located once and cached.
    """

    def __init__(self, dist: GainDistribution, total_slots: int, rate_nats: float):
        if total_slots < 1:
            raise ValueError("total_slots must be >= 1")
        if rate_nats <= 0.0:
            raise ValueError("rate_nats must be positive")
        self.dist = dist
        self.total_slots = int(total_slots)
        self.rate_nats = float(rate_nats)
        self._clamp_kappa: float | None = None

    # -- threshold -------------------------------------------------------------

    def threshold_stats(self, kappa: float) -> ThresholdStats:
        """Quantile mean and the kappa(1-kappa)/(T f^2) sampling std."""
        if not 0.0 < kappa < 1.0:
            raise ValueError("kappa must be in (0, 1)")
        mu = self.dist.quantile(kappa)
        dens = self.dist.pdf(mu)
        if dens <= 0.0:
            raise ValueError(f"density vanishes at quantile {mu:.3g}")
        sigma = math.sqrt(kappa * (1.0 - kappa) / self.total_slots) / dens
        return ThresholdStats(mu, sigma)

    # -- water level -------------------------------------------------------------

    def _log_median(self, kappa: float) -> tuple[float, float, float]:
        """(log median of the level, tail log-mean, tail log-variance)."""
        mu_phi, var_phi = self.dist.truncated_log_moments(kappa)
        return self.rate_nats / (self.total_slots * kappa) - mu_phi, mu_phi, var_phi

    def _clamp_boundary(self, kappa_neg: float) -> float:
        """Active ratio where level * threshold crosses 1 (cached).

        kappa_neg must sit in the level*threshold < 1 regime. h(k) =
        log median(k) + ln quantile(k) is strictly decreasing: the level
        falls as more slots share the rate and the quantile falls as the
        threshold digs deeper, so the crossing below kappa_neg is unique.
        """
        if self._clamp_kappa is not None:
            return self._clamp_kappa

        def h(k: float) -> float:
            return self._log_median(k)[0] + math.log(self.dist.quantile(k))

        hi = kappa_neg
        lo = 0.5 * hi
        while h(lo) <= 0.0:
            hi = lo
            lo *= 0.5
            if lo < 1e-12:
                raise EstimationError(
                    "level*threshold stays below 1 down to kappa=1e-12 "
                    f"(rate_nats={self.rate_nats:.3g}, T={self.total_slots}); "
                    "the rate requirement is too small for this window"
                )
        self._clamp_kappa = brentq(h, lo, hi, xtol=1e-14, rtol=1e-13)
        return self._clamp_kappa

    def nu_stats(self, kappa: float) -> NuStats:
        """Log-normal moments of the water level at the given active ratio."""
        if not 0.0 < kappa < 1.0:
            raise ValueError("kappa must be in (0, 1)")
        log_median, mu_phi, var_phi = self._log_median(kappa)
        clamped = False
        kappa_eff = kappa
        if log_median + math.log(self.dist.quantile(kappa)) < 0.0:
            kappa_eff = self._clamp_boundary(kappa)
            if kappa_eff < kappa:
                clamped = True
                log_median, mu_phi, var_phi = self._log_median(kappa_eff)
            else:
                kappa_eff = kappa
        log_var = var_phi / (self.total_slots * kappa_eff)
        if log_median + 0.5 * log_var > _EXP_OVERFLOW:
            mu_nu = math.inf
            sigma_nu = math.inf
        else:
            mu_nu = math.exp(log_median + 0.5 * log_var)
            sigma_nu = math.sqrt(math.expm1(log_var)) * math.exp(log_median + 0.5 * log_var)
        return NuStats(mu_nu, sigma_nu, log_median, math.sqrt(log_var), clamped, kappa_eff)

    # -- power -------------------------------------------------------------------

    def mean_transmit_power(self, kappa: float) -> float:
        """Mean transmit power per slot: kappa_eff * (mean level - mean 1/G)."""
        ns = self.nu_stats(kappa)
        if not math.isfinite(ns.mu_nu):
            return math.inf
        mu_g_inv = self.dist.truncated_inv_moment(ns.kappa_eff)
        return ns.kappa_eff * (ns.mu_nu - mu_g_inv)

    def mean_total_power(self, kappa: float, power_model: PowerModel) -> float:
        """Mean supply power per slot; the circuit term uses the requested
        ratio (clamped slots stay switched on, just at zero power)."""
        return (
            self.mean_transmit_power(kappa) / power_model.pa_efficiency
            + kappa * (power_model.p_active_w - power_model.p_sleep_w)
            + power_model.p_sleep_w
        )

    def optimize_kappa(self, power_model: PowerModel) -> float:
        """Active ratio minimizing mean supply power on [1/T, 1 - 1/T].

        Coarse grid (step 1/T, capped at 1000 points) then golden-section
        refinement of the bracketing interval to 1e-6.
        """
        t = self.total_slots
        lo, hi = 1.0 / t, 1.0 - 1.0 / t
        if t - 1 <= 1000:
            grid = np.arange(1, t) / t
        else:
            grid = np.linspace(lo, hi, 1000)
        cost = lru_cache(maxsize=None)(
            lambda k: self.mean_total_power(float(k), power_model)
        )
        values = [cost(k) for k in grid]
        best = int(np.argmin(values))
        a = grid[best - 1] if best > 0 else lo
        b = grid[best + 1] if best < grid.size - 1 else hi
        k_star = _golden_section(cost, a, b, tol=1e-6)
        return k_star if cost(k_star) <= values[best] else float(grid[best])

    # -- conservative plan ----------------------------------------------------------

    def conservative_estimates(self, kappa_star: float) -> ConservativePlan:
        """Threshold lowered and water level raised by two standard deviations."""
        ts = self.threshold_stats(kappa_star)
        ns = self.nu_stats(kappa_star)
        g_th_hat = max(ts.mu - 2.0 * ts.sigma, 0.0)
        nu_hat = math.exp(ns.log_mean + 2.0 * ns.log_sd)
        return ConservativePlan(kappa_star, g_th_hat, nu_hat)

    # -- full row ----------------------------------------------------------------

    def kappa_estimates(self, kappa: float, power_model: PowerModel) -> KappaEstimates:
        """All statistics at one active ratio, for reporting."""
        ts = self.threshold_stats(kappa)
        ns = self.nu_stats(kappa)
        mu_phi, _ = self.dist.truncated_log_moments(ns.kappa_eff)
        mu_g_inv = self.dist.truncated_inv_moment(ns.kappa_eff)
        mu_psi_p = self.mean_transmit_power(kappa)
        return KappaEstimates(
            kappa=kappa,
            mu_gth=ts.mu,
            sigma_gth=ts.sigma,
            mu_phi=mu_phi,
            sigma_phi=ns.log_sd,
            mu_nu=ns.mu_nu,
            sigma_nu=ns.sigma_nu,
            mu_g_inv=mu_g_inv,
            mu_psi_p=mu_psi_p,
            mu_omega=mu_psi_p / power_model.pa_efficiency
            + kappa * (power_model.p_active_w - power_model.p_sleep_w)
            + power_model.p_sleep_w,
            case2_clamped=ns.case2_clamped,
        )


def _golden_section(f, a: float, b: float, tol: float) -> float:
    """Golden-section minimizer of a unimodal f on [a, b]."""
    h = b - a
    if h <= tol:
        return 0.5 * (a + b)
    c = b - _INV_PHI * h
    d = a + _INV_PHI * h
    fc, fd = f(c), f(d)
    while h > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            h = b - a
            c = b - _INV_PHI * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + _INV_PHI * h
            fd = f(d)
    return 0.5 * (a + b)


# -- free-function mirrors of the class methods ---------------------------------


def threshold_stats(kappa: float, total_slots: int, dist: GainDistribution):
    est = LargeScaleEstimator(dist, total_slots, rate_nats=1.0)
    return est.threshold_stats(kappa)


def nu_stats(kappa: float, total_slots: int, rate_nats: float, dist: GainDistribution):
    return LargeScaleEstimator(dist, total_slots, rate_nats).nu_stats(kappa)


def mean_transmit_power(kappa: float, total_slots: int, rate_nats: float, dist: GainDistribution):
    return LargeScaleEstimator(dist, total_slots, rate_nats).mean_transmit_power(kappa)


def mean_total_power(
    kappa: float,
    total_slots: int,
    rate_nats: float,
    dist: GainDistribution,
    power_model: PowerModel,
):
    return LargeScaleEstimator(dist, total_slots, rate_nats).mean_total_power(kappa, power_model)


def optimize_kappa(
    total_slots: int, rate_nats: float, dist: GainDistribution, power_model: PowerModel
):
    return LargeScaleEstimator(dist, total_slots, rate_nats).optimize_kappa(power_model)


def conservative_estimates(
    kappa_star: float, total_slots: int, rate_nats: float, dist: GainDistribution
):
    return LargeScaleEstimator(dist, total_slots, rate_nats).conservative_estimates(kappa_star)
