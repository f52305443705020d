"""Equal-weight Gamma-mixture law of the per-slot equivalent channel gains.

When the per-frame large-scale gains alpha_1..alpha_F are known, the pooled
equivalent gains behave like i.i.d. draws from the mixture

    f(g) = (1/F) * sum_j  Gamma(shape=n_antennas, scale=alpha_j/noise).pdf(g)

Quantiles come from bracketed root-finding on the mixture tail; truncated
log/inverse moments come from vectorized adaptive Gauss-Legendre panels with
an analytic incomplete-Gamma closure beyond the 1-1e-12 quantile.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special
from scipy.optimize import brentq


class QuadratureError(RuntimeError):
    """Adaptive panel refinement failed to converge; carries diagnostics."""


# Upper-tail mass ignored by the finite panels and closed analytically.
_TAIL_EPS = 1e-12
# Absolute convergence tolerance for the panel-doubling loop.
_QUAD_TOL = 1e-10
_GL_NODES = 16
_PANELS_START = 12
_PANELS_MAX = 192

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _GL_CACHE:
        _GL_CACHE[n] = leggauss(n)
    return _GL_CACHE[n]


def _panel_pass(
    shape: float, lower: np.ndarray, upper: np.ndarray, u_power: float, n_panels: int
) -> np.ndarray:
    """One quadrature pass of I_p = int_a^b u^(shape-1+u_power) e^-u ln(u)^p du / Gamma(shape).

    Returns array (3, m) for p = 0, 1, 2. Panels are geometric in u so the
    log factor varies slowly inside each panel.
    """
    x, w = _gl_rule(_GL_NODES)
    t = np.linspace(0.0, 1.0, n_panels + 1)
    # geometric breakpoints per row: a * (b/a)^t
    bp = lower[:, None] * (upper / lower)[:, None] ** t[None, :]
    mid = 0.5 * (bp[:, 1:] + bp[:, :-1])
    half = 0.5 * (bp[:, 1:] - bp[:, :-1])
    u = mid[:, :, None] + half[:, :, None] * x          # (m, panels, nodes)
    wt = half[:, :, None] * w
    logu = np.log(u)
    dens = np.exp((shape - 1.0 + u_power) * logu - u - special.gammaln(shape))
    base = wt * dens
    out = np.empty((3, lower.size))
    out[0] = base.sum(axis=(1, 2))
    base *= logu
    out[1] = base.sum(axis=(1, 2))
    base *= logu
    out[2] = base.sum(axis=(1, 2))
    return out


def _tail_closure(shape: float, upper: np.ndarray, u_power: float) -> np.ndarray:
    """Analytic (0th) / boundary-value (1st, 2nd) moments of the ignored tail."""
    if u_power == 0.0:
        mass = special.gammaincc(shape, upper)
    elif shape + u_power > 0.0:
        mass = (
            np.exp(special.gammaln(shape + u_power) - special.gammaln(shape))
            * special.gammaincc(shape + u_power, upper)
        )
    else:
        # shape + u_power == 0 only for shape=1, u_power=-1: exponential integral
        mass = special.exp1(upper) / special.gamma(shape)
    logu = np.log(upper)
    return np.stack([mass, mass * logu, mass * logu ** 2])


def _gamma_tail_log_moments(shape: float, lower: np.ndarray, u_power: float = 0.0) -> np.ndarray:
    """I_p = int_a^inf u^(shape-1+u_power) e^-u ln(u)^p du / Gamma(shape), p = 0,1,2.

    Vectorized over the lower limits (one per mixture component). Panels are
    doubled until two successive passes agree to _QUAD_TOL absolutely.
    """
    lower = np.asarray(lower, float)
    if np.any(lower <= 0.0):
        raise ValueError("lower limits must be positive")
    cutoff = float(special.gammainccinv(shape, _TAIL_EPS))
    out = np.zeros((3, lower.size))
    deep = lower >= cutoff
    if np.any(deep):
        # whole remaining mass is beyond the cutoff: boundary-value closure at a
        out[:, deep] = _tail_closure(shape, lower[deep], u_power)
    live = ~deep
    if np.any(live):
        a = lower[live]
        b = np.full(a.shape, cutoff)
        closure = _tail_closure(shape, b, u_power)
        prev = _panel_pass(shape, a, b, u_power, _PANELS_START) + closure
        n_panels = 2 * _PANELS_START
        while n_panels <= _PANELS_MAX:
            cur = _panel_pass(shape, a, b, u_power, n_panels) + closure
            err = float(np.max(np.abs(cur - prev)))
            if err < _QUAD_TOL:
                out[:, live] = cur
                return out
            prev = cur
            n_panels *= 2
        raise QuadratureError(
            f"tail moments did not converge: shape={shape}, u_power={u_power}, "
            f"panels={_PANELS_MAX}, last_delta={err:.3e}"
        )
    return out


class GainDistribution:
    """Mixture law of equivalent gains; immutable, all queries pure.

    Components are canonically sorted so every query is bitwise invariant
    under permutations of the alphas.
    """

    def __init__(self, alphas, n_antennas: int, noise_power_w: float):
        alphas = np.sort(np.asarray(alphas, float))
        if alphas.size == 0:
            raise ValueError("need at least one mixture component")
        if not (np.all(np.isfinite(alphas)) and np.all(alphas > 0)):
            raise ValueError("alphas must be positive and finite")
        if n_antennas < 1:
            raise ValueError("n_antennas must be >= 1")
        if noise_power_w <= 0.0:
            raise ValueError("noise_power_w must be positive")
        self.alphas = alphas
        self.n_antennas = int(n_antennas)
        self.noise_power_w = float(noise_power_w)
        # per-component rate of the Gamma density in g
        self._rates = noise_power_w / alphas
        self._log_rates = np.log(self._rates)

    @property
    def n_components(self) -> int:
        return self.alphas.size

    # -- density / tail ------------------------------------------------------

    def pdf(self, g):
        """Mixture density; proper (integrates to 1), so each component
        carries the noise/alpha change-of-variables factor."""
        g_arr = np.atleast_1d(np.asarray(g, float))
        if np.any(g_arr < 0.0):
            raise ValueError("gain must be >= 0")
        k = self.n_antennas
        x = self._rates[:, None] * g_arr[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            logpdf = (
                (k - 1) * np.log(x)
                - x
                - special.gammaln(k)
                + self._log_rates[:, None]
            )
            vals = np.exp(logpdf)
        if np.any(g_arr == 0.0):
            # limit at 0: rate for the exponential case, 0 for k > 1
            at0 = self._rates[:, None] if k == 1 else np.zeros((self.n_components, 1))
            vals[:, g_arr == 0.0] = at0
        out = vals.mean(axis=0)
        return float(out[0]) if np.ndim(g) == 0 else out

    def tail(self, g):
        """P(G >= g): mixture of regularized upper incomplete Gammas."""
        g_arr = np.atleast_1d(np.asarray(g, float))
        x = self._rates[:, None] * np.maximum(g_arr, 0.0)[None, :]
        out = special.gammaincc(self.n_antennas, x).mean(axis=0)
        return float(out[0]) if np.ndim(g) == 0 else out

    def cdf(self, g):
        return 1.0 - self.tail(g)

    # -- quantile ------------------------------------------------------------

    def quantile(self, kappa: float) -> float:
        """Gain q with tail mass kappa above it: tail(q) = kappa."""
        if not 0.0 < kappa < 1.0:
            raise ValueError("kappa must be in (0, 1)")
        # largest component quantile bounds the mixture quantile; pad out the
        # few ulps of rounding so the bracket signs are strict
        hi = float(special.gammainccinv(self.n_antennas, kappa) / self._rates.min())
        for _ in range(200):
            if self.tail(hi) <= kappa:
                break
            hi *= 1.25
        else:
            raise RuntimeError(f"quantile bracket failed for kappa={kappa}")
        return brentq(lambda q: self.tail(q) - kappa, 0.0, hi, xtol=1e-300, rtol=1e-13)

    # -- truncated moments ----------------------------------------------------

    def truncated_log_moments(self, kappa: float) -> tuple[float, float]:
        """(mean, variance) of ln G conditioned on G >= quantile(kappa)."""
        if not 0.0 < kappa < 1.0:
            raise ValueError("kappa must be in (0, 1)")
        q = self.quantile(kappa)
        mass = self.tail(q)
        m = _gamma_tail_log_moments(self.n_antennas, self._rates * q)
        # ln g = ln u - ln rate under u = rate*g
        e_log = np.mean(m[1] - self._log_rates * m[0]) / mass
        e_log2 = (
            np.mean(m[2] - 2.0 * self._log_rates * m[1] + self._log_rates ** 2 * m[0])
            / mass
        )
        return e_log, max(e_log2 - e_log ** 2, 0.0)

    def truncated_inv_moment(self, kappa: float) -> float:
        """Mean of 1/G conditioned on G >= quantile(kappa)."""
        if not 0.0 < kappa < 1.0:
            raise ValueError("kappa must be in (0, 1)")
        q = self.quantile(kappa)
        mass = self.tail(q)
        m = _gamma_tail_log_moments(self.n_antennas, self._rates * q, u_power=-1.0)
        return float(np.mean(self._rates * m[0]) / mass)

    # -- sampling --------------------------------------------------------------

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """i.i.d. draws from the mixture (component uniform, then Gamma)."""
        comp = rng.integers(0, self.n_components, size=count)
        fades = rng.gamma(shape=float(self.n_antennas), scale=1.0, size=count)
        return fades / self._rates[comp]
