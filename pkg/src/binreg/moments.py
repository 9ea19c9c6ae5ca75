"""Gaussian interval/rectangle kernels and conditional-moment formulas.

The two kernels are

    p(t, y)      = P(|Z - y| <= t)                       for standard normal Z,
    q(t, y, rho) = P(|Z1 - y| <= t, |Z2 - y| <= t)       for correlated (Z1, Z2),

and the conditional moments of the count of k-sparse binary vectors whose
max-norm residual stays below t*sqrt(k) are products of these kernels over
the response entries, weighted by log-domain combinatorial coefficients.
All combinatorics run through log-gamma so dimensions up to p ~ 1e9 never
overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import erfc, logsumexp

from .model import ModelParams

_SQRT2 = math.sqrt(2.0)
_RHO_ONE_CUTOFF = 1.0 - 1e-6
_GL_ORDER = 20
_MAX_DEPTH = 48


def gauss_interval_prob(a, b):
    """P(a <= Z <= b) for standard normal Z, stable in both tails; vectorized."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    flip = lo + hi < 0  # reflect so the interval midpoint is >= 0, then use erfc
    lo, hi = np.where(flip, -hi, lo), np.where(flip, -lo, hi)
    out = 0.5 * (erfc(lo / _SQRT2) - erfc(hi / _SQRT2))
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def p_ty(t: float, y) -> float:
    """Gaussian interval kernel P(|Z - y| <= t)."""
    if t <= 0:
        raise ValueError(f"t must be > 0, got {t}")
    return gauss_interval_prob(np.asarray(y, float) - t, np.asarray(y, float) + t)


def log_p_ty(t: float, y) -> float:
    p = p_ty(t, y)
    with np.errstate(divide="ignore"):
        out = np.log(p)
    return out if np.ndim(out) else float(out)


@lru_cache(maxsize=None)
def _gl_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def _gl_panel(f, a: float, b: float) -> float:
    x, w = _gl_nodes(_GL_ORDER)
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    return half * float(w @ f(mid + half * x))


def _adaptive_gl(f, a: float, b: float, tol: float, depth: int = 0) -> tuple[float, float]:
    """Adaptive bisection with fixed-order Gauss-Legendre panels; returns (value, error estimate)."""
    coarse = _gl_panel(f, a, b)
    mid = 0.5 * (a + b)
    fine = _gl_panel(f, a, mid) + _gl_panel(f, mid, b)
    err = abs(fine - coarse)
    if err <= tol or depth >= _MAX_DEPTH:
        return fine, err
    left_v, left_e = _adaptive_gl(f, a, mid, tol / 2.0, depth + 1)
    right_v, right_e = _adaptive_gl(f, mid, b, tol / 2.0, depth + 1)
    return left_v + right_v, left_e + right_e


def q_tyrho_with_error(t: float, y: float, rho: float, *, tol: float = 1e-12) -> tuple[float, float]:
    """Bivariate rectangle kernel with a quadrature error estimate.

    Computed as the integral over z in [y-t, y+t] of
    phi(z) * P((y-t-rho z)/s <= Z <= (y+t-rho z)/s), s = sqrt(1-rho^2).
    rho = 0 factorizes exactly to p(t,y)^2; rho above 1 - 1e-6
    short-circuits to the rho = 1 value p(t,y), whose absolute error is
    O(sqrt(1-rho)) and therefore below ~1e-3 there.
    """
    if t <= 0:
        raise ValueError(f"t must be > 0, got {t}")
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    if rho == 0.0:
        return p_ty(t, y) ** 2, 0.0
    if rho >= _RHO_ONE_CUTOFF:
        return p_ty(t, y), 0.0
    s = math.sqrt((1.0 - rho) * (1.0 + rho))

    def integrand(z: np.ndarray) -> np.ndarray:
        inner = gauss_interval_prob((y - t - rho * z) / s, (y + t - rho * z) / s)
        return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi) * inner

    value, err = _adaptive_gl(integrand, y - t, y + t, tol)
    return min(max(value, 0.0), 1.0), err


def q_tyrho(t: float, y: float, rho: float, *, tol: float = 1e-12) -> float:
    """P(|Z1 - y| <= t, |Z2 - y| <= t) for standard bivariate normal with correlation rho."""
    return q_tyrho_with_error(t, y, rho, tol=tol)[0]


def q_ratio_bound(y: float, rho: float) -> float:
    """Closed-form bound on q / p^2: sqrt((1+rho)/(1-rho)) * exp(rho y^2), rho in [0, 1)."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    return math.sqrt((1.0 + rho) / (1.0 - rho)) * math.exp(rho * y * y)


def log_p_lower_bound(t: float, y: float) -> float:
    """Closed-form floor for log p(t, y): log t - t^2/2 - y^2/2 + (1/2) log(2/pi)."""
    if t <= 0:
        raise ValueError(f"t must be > 0, got {t}")
    return math.log(t) - 0.5 * t * t - 0.5 * y * y + 0.5 * math.log(2.0 / math.pi)


# ---------------------------------------------------------------------------
# Conditional moments of the sub-level count, given the response vector.
# ---------------------------------------------------------------------------


def log_binom(a: int, b: int) -> float:
    if not 0 <= b <= a:
        return -math.inf
    return math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)


def _log_pair_coef(p: int, k: int, ell: int) -> float:
    """log of the number of ordered support pairs with intersection size ell."""
    return (
        math.lgamma(p + 1)
        - math.lgamma(ell + 1)
        - 2.0 * math.lgamma(k - ell + 1)
        - math.lgamma(p - 2 * k + ell + 1)
    )


def cond_first_moment_log(Y, params: ModelParams, t: float) -> float:
    """log E[count | Y] = log C(p, k) + sum_i log p(t, Y_i / sqrt(k)).

    The effective sample count is len(Y); an empty Y gives the bare
    log C(p, k).
    """
    y = np.asarray(Y, dtype=float)
    base = log_binom(params.p, params.k)
    if y.size == 0:
        return base
    logs = np.log(p_ty(t, y / math.sqrt(params.k)))
    return base + float(np.sum(logs))


def cond_second_moment_log(Y, params: ModelParams, t: float) -> float:
    """log E[count^2 | Y]: log-sum-exp over intersection sizes of coefficient + kernel products."""
    p, k = params.p, params.k
    if p < 2 * k:
        raise ValueError(
            f"second moment formula needs p >= 2k (disjoint-support pair counting); got p={p}, k={k}"
        )
    y = np.asarray(Y, dtype=float) / math.sqrt(k)
    log_p = np.log(p_ty(t, y)) if y.size else np.zeros(0)
    terms = []
    for ell in range(k + 1):
        coef = _log_pair_coef(p, k, ell)
        if ell == 0:
            kernel = 2.0 * float(np.sum(log_p))
        elif ell == k:
            kernel = float(np.sum(log_p))
        else:
            kernel = float(sum(math.log(q_tyrho(t, float(yi), ell / k)) for yi in y))
        terms.append(coef + kernel)
    return float(logsumexp(terms))


@dataclass(frozen=True)
class MomentReport:
    t: float
    log_first_moment: float
    log_second_moment: float
    upsilon: float
    per_rho_ratio: tuple[float, ...]   # ell = 1..k: log contribution of each overlap summand
    quadrature_error_estimate: float

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "log_first_moment": self.log_first_moment,
            "log_second_moment": self.log_second_moment,
            "upsilon": self.upsilon,
            "per_rho_ratio": list(self.per_rho_ratio),
            "quadrature_error_estimate": self.quadrature_error_estimate,
        }


def compute_moment_report(Y, params: ModelParams, t: float) -> MomentReport:
    """First/second conditional moments plus the ratio (second / first^2) and its summands."""
    p, k = params.p, params.k
    if p < 2 * k:
        raise ValueError(f"moment report needs p >= 2k; got p={p}, k={k}")
    y = np.asarray(Y, dtype=float) / math.sqrt(k)
    log_p = np.log(p_ty(t, y)) if y.size else np.zeros(0)
    sum_log_p = float(np.sum(log_p))
    log_first = log_binom(p, k) + sum_log_p

    rel_err = 0.0
    terms = []
    ratio_terms = []
    for ell in range(k + 1):
        coef = _log_pair_coef(p, k, ell)
        if ell == 0:
            kernel = 2.0 * sum_log_p
        elif ell == k:
            kernel = sum_log_p
        else:
            kernel = 0.0
            for yi in y:
                q, err = q_tyrho_with_error(t, float(yi), ell / k)
                kernel += math.log(q)
                rel_err += err / q if q > 0 else math.inf
        terms.append(coef + kernel)
        if ell >= 1:
            ratio_terms.append(coef + kernel - 2.0 * log_first)
    log_second = float(logsumexp(terms))
    upsilon = math.exp(log_second - 2.0 * log_first)
    return MomentReport(
        t=t,
        log_first_moment=log_first,
        log_second_moment=log_second,
        upsilon=upsilon,
        per_rho_ratio=tuple(ratio_terms),
        quadrature_error_estimate=rel_err,
    )


# ---------------------------------------------------------------------------
# Scalar helpers: tail exponent and concavity checks.
# ---------------------------------------------------------------------------


def chi_square_tail_exponent(t0: float) -> float:
    """Large-deviation exponent f(t0) = (1 - t0^2 + 2 log t0) / 2 for t0 in (0, 1)."""
    if not 0.0 < t0 < 1.0:
        raise ValueError(f"t0 must lie in (0, 1), got {t0}")
    return 0.5 * (1.0 - t0 * t0 + 2.0 * math.log(t0))


def chi_square_tail_bound(n: int, t0: float) -> float:
    """Upper bound exp(n f(t0)) on P(sum of n squared standard normals <= n t0^2)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return math.exp(n * chi_square_tail_exponent(t0))


def f_rho(rho) -> float:
    """(1/rho) log((1-rho)/(1+rho)) on (0, 1); tends to -2 as rho -> 0."""
    r = np.asarray(rho, dtype=float)
    if np.any(r <= 0) or np.any(r >= 1):
        raise ValueError("rho must lie strictly inside (0, 1)")
    out = (np.log1p(-r) - np.log1p(r)) / r
    return out if out.ndim else float(out)


def concavity_check_f_rho(grid) -> bool:
    """True when f_rho has non-increasing slopes (concavity) along the sorted grid."""
    g = np.asarray(grid, dtype=float)
    if g.size < 3:
        raise ValueError("need at least 3 grid points")
    if np.any(np.diff(g) <= 0):
        raise ValueError("grid must be strictly increasing")
    if g[0] <= 0 or g[-1] >= 1:
        raise ValueError("grid must lie strictly inside (0, 1)")
    vals = f_rho(g)
    slopes = np.diff(vals) / np.diff(g)
    ds = np.diff(slopes)
    tol = 1e-10 + 1e-12 * np.maximum(np.abs(slopes[:-1]), np.abs(slopes[1:]))
    return bool(np.all(ds <= tol))
