"""Gamma, Beta and two-parameter Mittag-Leffler functions on the real line.

``mittag_leffler`` picks between three evaluation routes:

* the power series, summed in log space, for moderate arguments;
* the exponential asymptotic expansion once ``z**(1/alpha) > 30``;
* a Hankel-contour integral (alpha <= 1) or an mpmath series (alpha > 1)
  when the alternating series for negative ``z`` loses too many digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import special
from scipy.special import roots_legendre

from .errors import DomainError

ASYMPTOTIC_SWITCH = 30.0  # switch when z**(1/alpha) exceeds this
SERIES_RTOL = 1e-16
SERIES_MIN_TERMS = 500
CANCELLATION_LIMIT = 1e3  # sum|t_k| / |sum t_k| tolerated by the plain series
_LOG_MAX = math.log(np.finfo(float).max)


def gamma_fn(x: float) -> float:
    """Euler's Gamma function for positive arguments."""
    if not x > 0:
        raise DomainError(f"gamma_fn needs x > 0, got {x!r}")
    return float(special.gamma(x))


def rgamma(x):
    """1/Gamma(x), exactly zero at the non-positive integers."""
    return special.rgamma(x)


def beta_integral(p: float, q: float, t: float = 1.0) -> float:
    """Closed form of int_0^t s^(p-1) (t-s)^(q-1) ds."""
    if not (p > 0 and q > 0):
        raise DomainError(f"beta_integral needs p, q > 0, got p={p!r}, q={q!r}")
    if t < 0:
        raise DomainError("beta_integral needs t >= 0")
    if t == 0:
        return 0.0 if p + q > 1 else (math.inf if p + q < 1 else math.exp(special.betaln(p, q)))
    return math.exp(special.betaln(p, q) + (p + q - 1) * math.log(t))


@dataclass(frozen=True)
class MLParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise DomainError(f"Mittag-Leffler alpha must lie in ]0,2[, got {self.alpha!r}")
        if not self.beta > 0:
            raise DomainError(f"Mittag-Leffler beta must be > 0, got {self.beta!r}")


def _series_terms(alpha: float, beta: float, z: float, n: int) -> np.ndarray:
    k = np.arange(n, dtype=float)
    logmag = k * math.log(abs(z)) - special.gammaln(alpha * k + beta)
    terms = np.exp(logmag)
    if z < 0:
        terms[1::2] *= -1.0
    return terms


def _ml_series(alpha: float, beta: float, z: float) -> tuple[float, float, bool]:
    """Plain power series.

    Returns (value, cancellation ratio, converged).  The term budget starts
    at SERIES_MIN_TERMS and grows past the peak term, which for small alpha
    sits near k = |z|**(1/alpha) / alpha.
    """
    if z == 0:
        return float(rgamma(beta)), 1.0, True
    peak = max(abs(z) ** (1.0 / alpha) - beta, 0.0) / alpha
    n = int(max(SERIES_MIN_TERMS, 3 * peak + 200))
    if n > 200_000:
        return math.nan, math.inf, False
    k_peak = min(peak, n - 1)
    if k_peak * math.log(abs(z)) - special.gammaln(alpha * k_peak + beta) > _LOG_MAX - 10:
        # terms overflow before they start shrinking
        return math.nan, math.inf, False
    terms = _series_terms(alpha, beta, z, n)
    total = math.fsum(terms)
    converged = abs(terms[-1]) < SERIES_RTOL * abs(total) or terms[-1] == 0.0
    if total == 0.0:
        return 0.0, math.inf, converged
    ratio = float(np.sum(np.abs(terms))) / abs(total)
    return total, ratio, converged


def _ml_asymptotic(alpha: float, beta: float, z: float) -> float:
    """Exponential expansion for large positive z, algebraic terms added while they shrink."""
    root = z ** (1.0 / alpha)
    logmain = -math.log(alpha) + (1.0 - beta) / alpha * math.log(z) + root
    if logmain > _LOG_MAX:
        return math.inf
    value = math.exp(logmain)
    prev = math.inf
    for k in range(1, 11):
        term = z ** (-k) * float(rgamma(beta - alpha * k))
        if abs(term) >= prev or abs(term) < 1e-17 * abs(value):
            break
        value -= term
        prev = abs(term) if term != 0 else prev
    return value


_GL_X, _GL_W = roots_legendre(64)


def _ml_contour(alpha: float, beta: float, z: float) -> float:
    """Hankel-contour integral for z < 0, valid for 0 < alpha <= 1.

    The contour is two rays at angle +-mu joined by the unit arc; z lies
    outside it, so no residue is picked up.
    """
    mu = 0.75 * alpha * math.pi
    eps = 1.0
    decay = -math.cos(mu / alpha)  # integrand ~ exp(-decay * r**(1/alpha)) on the rays
    r_max = max(2.0 * eps, (60.0 / decay) ** alpha)
    edges = np.geomspace(eps, r_max, 9)
    total = 0j
    for lo, hi in zip(edges[:-1], edges[1:]):
        r = 0.5 * (hi - lo) * _GL_X + 0.5 * (hi + lo)
        wr = 0.5 * (hi - lo) * _GL_W
        for sgn in (1.0, -1.0):
            rot = np.exp(1j * sgn * mu)
            zeta = r * rot
            f = np.exp(zeta ** (1.0 / alpha)) * zeta ** ((1.0 - beta) / alpha) / (zeta - z) * rot
            total += sgn * np.sum(wr * f)
    phi = mu * _GL_X
    zeta = eps * np.exp(1j * phi)
    f = np.exp(zeta ** (1.0 / alpha)) * zeta ** ((1.0 - beta) / alpha) / (zeta - z) * 1j * zeta
    total += np.sum(mu * _GL_W * f)
    return float((total / (2j * math.pi * alpha)).real)


def _ml_series_mp(alpha: float, beta: float, z: float, digits: int) -> float:
    with mpmath.workdps(digits):
        zz = mpmath.mpf(z)
        a = mpmath.mpf(alpha)
        b = mpmath.mpf(beta)
        total = mpmath.mpf(0)
        power = mpmath.mpf(1)
        k = 0
        tiny = mpmath.mpf(10) ** (-digits)
        peak = max(abs(z) ** (1.0 / alpha) - beta, 0.0) / alpha
        while True:
            term = power * mpmath.rgamma(a * k + b)
            total += term
            if k > peak and abs(term) <= tiny * abs(total):
                break
            power *= zz
            k += 1
            if k > 100_000:
                break
        return float(total)


def mittag_leffler(ml: MLParams, z: float) -> float:
    """E_{alpha,beta}(z) = sum_k z^k / Gamma(alpha k + beta) for real z."""
    alpha, beta = ml.alpha, ml.beta
    z = float(z)
    if math.isnan(z):
        return math.nan
    if z == 0:
        return float(rgamma(beta))
    if z > 0 and z ** (1.0 / alpha) > ASYMPTOTIC_SWITCH:
        return _ml_asymptotic(alpha, beta, z)
    value, ratio, converged = _ml_series(alpha, beta, z)
    if converged and ratio <= CANCELLATION_LIMIT:
        return value
    if z < 0 and alpha <= 1.0:
        return _ml_contour(alpha, beta, z)
    digits = 30 + int(math.log10(max(ratio, 1.0))) if math.isfinite(ratio) else 60
    return _ml_series_mp(alpha, beta, z, digits)


def mittag_leffler_array(ml: MLParams, z) -> np.ndarray:
    """Elementwise ``mittag_leffler`` over an array of arguments."""
    z = np.asarray(z, dtype=float)
    out = np.empty(z.shape)
    flat = out.reshape(-1)
    for i, zi in enumerate(z.reshape(-1)):
        flat[i] = mittag_leffler(ml, zi)
    return out


def ml_time_integral(ml: MLParams, lam: float, t: float) -> float:
    """int_0^t E_{alpha,beta}(lam s^alpha) s^(beta-1) ds = t^beta E_{alpha,beta+1}(lam t^alpha)."""
    if t < 0:
        raise DomainError("ml_time_integral needs t >= 0")
    if t == 0:
        return 0.0
    inner = mittag_leffler(MLParams(ml.alpha, ml.beta + 1.0), lam * t**ml.alpha)
    return t**ml.beta * inner
