"""Closed-form limiting curve, recovery thresholds, regime classification, and overlap-gap windows.

Everything here is a pure function of the model parameters; all logs are
natural. The central object is the curve

    gamma(z) = sqrt(2 z k + sigma2) * exp(-z k log(p) / n),   z in [0, 1],

whose value at overlap fraction z lower-bounds (up to the factor
exp(-3/2)) the optimum of the overlap-restricted problem, and whose
monotonicity pattern switches at the three sample-size thresholds
``n_inf1 = sigma2 log p``, ``n_star = 2 k log p / log(2k/sigma2 + 1)``,
and ``n_lasso = (2k + sigma2) log p``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import ModelParams

LOWER_BOUND_FACTOR = math.exp(-1.5)

# CRITICAL band: n is an integer in experiments while n_star is real, so
# classification treats |n - n_star| <= 0.5 as the critical case.
CRITICAL_TOL = 0.5


class VacuousWindowError(ValueError):
    """The overlap-gap window construction is vacuous at these parameters."""


class Regime(enum.Enum):
    DECREASING = "DECREASING"
    NONMONOTONE_MIN_AT_1 = "NONMONOTONE_MIN_AT_1"
    CRITICAL = "CRITICAL"
    NONMONOTONE_MIN_AT_0 = "NONMONOTONE_MIN_AT_0"
    INCREASING = "INCREASING"


@dataclass(frozen=True)
class ThresholdReport:
    n: float
    n_inf1: float
    n_star: float
    n_lasso: float
    zeta_star: float
    regime: Regime

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "n_inf1": self.n_inf1,
            "n_star": self.n_star,
            "n_lasso": self.n_lasso,
            "zeta_star": self.zeta_star,
            "regime": self.regime.value,
        }


@dataclass(frozen=True)
class GammaCurve:
    params: ModelParams
    zetas: np.ndarray
    gammas: np.ndarray


class OgpWindow(NamedTuple):
    zeta1: float
    zeta2: float
    r: float


def log_gamma_curve(zeta, params: ModelParams, n: float | None = None):
    """log gamma(zeta); vectorized over ``zeta``. Requires sigma2 > 0 or zeta > 0."""
    n_eff = params.n if n is None else n
    if n_eff < 1:
        raise ValueError(f"n must be >= 1, got {n_eff}")
    z = np.asarray(zeta, dtype=float)
    if np.any(z < 0) or np.any(z > 1):
        raise ValueError("zeta must lie in [0, 1]")
    if params.sigma2 <= 0 and np.any(z == 0):
        raise ValueError("gamma(0) undefined for sigma2 = 0")
    out = 0.5 * np.log(2.0 * z * params.k + params.sigma2) - z * params.k * math.log(params.p) / n_eff
    return out if out.ndim else float(out)


def gamma(zeta: float, params: ModelParams, n: float | None = None) -> float:
    """The limiting curve sqrt(2 zeta k + sigma2) exp(-zeta k log(p)/n), in log domain."""
    return math.exp(log_gamma_curve(zeta, params, n))


def gamma_curve(params: ModelParams, points: int = 512, n: float | None = None) -> GammaCurve:
    if points < 2:
        raise ValueError("need at least 2 grid points")
    zetas = np.linspace(0.0, 1.0, points)
    gammas = np.exp(log_gamma_curve(zetas, params, n))
    return GammaCurve(params, zetas, gammas)


def n_star(params: ModelParams) -> float:
    """Phase-transition sample size 2 k log p / log(2k/sigma2 + 1)."""
    if params.sigma2 <= 0:
        raise ValueError("n_star undefined for sigma2 = 0")
    return 2.0 * params.k * math.log(params.p) / math.log(2.0 * params.k / params.sigma2 + 1.0)


def thresholds(params: ModelParams, n: float | None = None) -> ThresholdReport:
    """All three thresholds plus the regime of the curve at sample size ``n``.

    zeta_star = (n - sigma2 log p) / (2 k log p) is the unique stationary
    point of log gamma; its position against [0, 1] decides monotonicity,
    and n against n_star decides where the minimum sits.
    """
    if params.sigma2 <= 0:
        raise ValueError("thresholds require sigma2 > 0")
    if params.p <= params.k:
        raise ValueError("thresholds require p > k")
    n_eff = float(params.n if n is None else n)
    if n_eff < 1:
        raise ValueError(f"n must be >= 1, got {n_eff}")
    log_p = math.log(params.p)
    rep_n_inf1 = params.sigma2 * log_p
    rep_n_star = n_star(params)
    rep_n_lasso = (2.0 * params.k + params.sigma2) * log_p
    zeta_star = (n_eff - rep_n_inf1) / (2.0 * params.k * log_p)

    if abs(n_eff - rep_n_star) <= CRITICAL_TOL:
        regime = Regime.CRITICAL
    elif zeta_star <= 0:
        regime = Regime.DECREASING
    elif zeta_star >= 1:
        regime = Regime.INCREASING
    elif n_eff < rep_n_star:
        regime = Regime.NONMONOTONE_MIN_AT_1
    else:
        regime = Regime.NONMONOTONE_MIN_AT_0
    return ThresholdReport(n_eff, rep_n_inf1, rep_n_star, rep_n_lasso, zeta_star, regime)


def lower_bound_curve(params: ModelParams, n: float | None = None) -> list[tuple[int, float]]:
    """Per-overlap lower bounds [(ell, exp(-3/2) * gamma(ell/k))] for ell = 0..k."""
    return [
        (ell, LOWER_BOUND_FACTOR * gamma(ell / params.k, params, n))
        for ell in range(params.k + 1)
    ]


def ogp_window(params: ModelParams, n: float | None = None, D0: float = 3.0) -> OgpWindow:
    """Overlap-fraction window (zeta1, zeta2) excluded for solutions below radius r.

    The construction first picks a raw window (z1, z2): for n <= n_star it
    is (e^7 D0^2 sigma2 / (2k), e^7 D0^2 sigma2 / k), otherwise (1/5, 1/4).
    The returned window is its image (1 - z2, 1 - z1) under the overlap
    flip, and r = D0 * max(gamma(0), gamma(1)). Raises
    :class:`VacuousWindowError` when the raw window does not fit inside
    (0, 1), rather than clamping to a window the theory does not give.
    """
    if D0 <= 1:
        raise ValueError(f"D0 must exceed 1, got {D0}")
    if params.sigma2 <= 0:
        raise ValueError("ogp_window requires sigma2 > 0")
    n_eff = float(params.n if n is None else n)
    if n_eff <= n_star(params):
        z1 = math.exp(7) * D0 * D0 * params.sigma2 / (2.0 * params.k)
        z2 = 2.0 * z1
    else:
        z1, z2 = 0.2, 0.25
    if z2 >= 1.0:
        raise VacuousWindowError(
            f"raw window ({z1:.4g}, {z2:.4g}) not inside (0, 1) at p={params.p}, "
            f"k={params.k}, sigma2={params.sigma2}, n={n_eff}, D0={D0}"
        )
    r = D0 * max(gamma(0.0, params, n_eff), gamma(1.0, params, n_eff))
    return OgpWindow(1.0 - z2, 1.0 - z1, r)


def ogp_hypotheses_hold(params: ModelParams, n: float | None = None, D0: float = 3.0) -> bool:
    """Exactly sufficient, numerically checkable conditions for the window's ratio guarantee.

    By log-concavity the infimum over the raw window of
    min(gamma(z)/gamma(0), gamma(z)/gamma(1)) is attained at an endpoint,
    so the guarantee "floor >= e^3 D0" reduces to two endpoint
    inequalities evaluated in log domain. Low branch (n <= n_star): the
    raw window must fit in (0, 1) and both endpoint ratios against
    gamma(0) must clear e^3 D0. High branch (n > n_star, needs
    n <= k log p / (3 log D0)): the endpoint ratios against gamma(1) must
    clear it, which effectively requires D0 on the order of 13 or more.
    """
    if D0 <= 1 or params.sigma2 <= 0:
        return False
    k, sigma2 = params.k, params.sigma2
    n_eff = float(params.n if n is None else n)
    log_p = math.log(params.p)
    target = 6.0 + 2.0 * math.log(D0)  # log of (e^3 D0)^2
    if n_eff <= n_star(params):
        z2 = math.exp(7) * D0 * D0 * sigma2 / k
        if z2 >= 1.0:
            return False
        x = math.exp(7) * D0 * D0 * sigma2 * log_p / n_eff  # = 2 z1 k log p / n
        low = math.log(math.exp(7) * D0 * D0 + 1.0) - x
        high = math.log(2.0 * math.exp(7) * D0 * D0 + 1.0) - 2.0 * x
        return min(low, high) >= target
    if n_eff > k * log_p / (3.0 * math.log(D0)):
        return False
    x = k * log_p / n_eff
    low = math.log((0.4 * k + sigma2) / (2.0 * k + sigma2)) + 1.6 * x
    high = math.log((0.5 * k + sigma2) / (2.0 * k + sigma2)) + 1.5 * x
    return min(low, high) >= target


def ogp_ratio_floor(params: ModelParams, n: float | None = None, D0: float = 3.0,
                    grid_points: int = 1000) -> float:
    """min over the raw (pre-flip) window of min(gamma(z)/gamma(0), gamma(z)/gamma(1)), in log domain.

    The guarantee, when the hypotheses hold, is that this floor is at least
    e^3 D0. Computed on ``grid_points`` interior points.
    """
    win = ogp_window(params, n, D0)
    z1, z2 = 1.0 - win.zeta2, 1.0 - win.zeta1
    zs = np.linspace(z1, z2, grid_points + 2)[1:-1]
    lg = log_gamma_curve(zs, params, n)
    lg0 = log_gamma_curve(0.0, params, n)
    lg1 = log_gamma_curve(1.0, params, n)
    return float(np.exp(np.min(lg - max(lg0, lg1))))


def check_binomial_lemma(m1: int, m2: int) -> bool:
    """Check C(m1, m2) >= m1^m2 / (4 m2!) in log domain (hypotheses: m1 >= 4, 1 <= m2 <= sqrt(m1))."""
    if m1 < 4:
        raise ValueError(f"m1 must be >= 4, got {m1}")
    if m2 < 1:
        raise ValueError(f"m2 must be >= 1, got {m2}")
    if m2 * m2 > m1:
        raise ValueError(f"m2={m2} violates m2 <= sqrt(m1) for m1={m1}")
    log_binom = math.lgamma(m1 + 1) - math.lgamma(m2 + 1) - math.lgamma(m1 - m2 + 1)
    log_rhs = m2 * math.log(m1) - math.log(4.0) - math.lgamma(m2 + 1)
    return log_binom >= log_rhs
