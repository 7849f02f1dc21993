"""Inverse-Gamma model of the unknown interference power.

Under the uninformative prior ``g(s) = 1/s`` on the variance ``s`` of a
Gaussian with known mean, a single observation ``x`` yields an
Inverse-Gamma(1/2, zeta) posterior with ``zeta = (x - mu)^2 / 2``. In
operation the shape and scale are instead matched to the sample mean and
variance of measured interference powers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    DomainError,
    inverse_regularized_upper_gamma,
    regularized_lower_gamma,
    regularized_upper_gamma,
)

__all__ = [
    "DegenerateStatisticsError",
    "FitError",
    "PosteriorParams",
    "InverseGammaParams",
    "SampleStats",
    "posterior_sigma_pdf",
    "inverse_gamma_pdf",
    "inverse_gamma_cdf",
    "inverse_gamma_sf",
    "inverse_gamma_quantile",
    "inverse_gamma_sample",
    "fit_inverse_gamma",
    "sample_stats",
]


class DegenerateStatisticsError(ValueError):
    """Samples carry no spread (zero variance) or the observation equals the mean."""


class FitError(ValueError):
    """Moments cannot be matched by an Inverse-Gamma distribution."""


@dataclass(frozen=True)
class PosteriorParams:
    mu_u: float
    x: float

    @property
    def zeta(self):
        return 0.5 * (self.x - self.mu_u) ** 2


@dataclass(frozen=True)
class InverseGammaParams:
    """Shape ``alpha`` and scale ``beta``.

    ``excess`` optionally holds ``alpha - 2`` exactly; moment matching knows
    it as ``mu^2 / v``, which ``alpha - 2`` cannot recover when it is tiny.
    """

    alpha: float
    beta: float
    excess: float | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise DomainError(f"Inverse-Gamma needs alpha, beta > 0, got {self.alpha}, {self.beta}")

    @property
    def _excess(self):
        return self.alpha - 2.0 if self.excess is None else self.excess

    @property
    def mean(self):
        if self._excess <= -1.0:
            return math.inf
        return self.beta / (self._excess + 1.0)

    @property
    def variance(self):
        excess = self._excess
        if excess <= 0.0:
            return math.inf
        return self.beta**2 / ((excess + 1.0) ** 2 * excess)


@dataclass(frozen=True)
class SampleStats:
    mu: float
    v: float
    count: int


def inverse_gamma_pdf(x, params):
    """``beta^alpha / Gamma(alpha) * x^-(alpha+1) * exp(-beta / x)`` for ``x > 0``, else 0."""
    if x <= 0:
        return 0.0
    a, b = params.alpha, params.beta
    return math.exp(a * math.log(b) - math.lgamma(a) - (a + 1.0) * math.log(x) - b / x)


def posterior_sigma_pdf(sigma_sq, params):
    """Posterior density of a Gaussian variance given one observation.

    Evaluated in the closed form
    ``zeta^(1/2) / Gamma(1/2) * sigma_sq^(-3/2) * exp(-zeta / sigma_sq)``.
    """
    if not sigma_sq > 0:
        raise DomainError("variance must be positive")
    zeta = params.zeta
    if zeta == 0:
        raise DegenerateStatisticsError("observation equals the known mean; posterior is improper")
    # one exp of the summed logs keeps precision where exp(-zeta / sigma_sq) alone is subnormal
    return math.exp(0.5 * math.log(zeta / math.pi) - 1.5 * math.log(sigma_sq) - zeta / sigma_sq)


def _tail(x, params, upper):
    # upper=False: Pr[X <= x] = Q(alpha, beta/x); upper=True: Pr[X > x] = P(alpha, beta/x)
    fn = regularized_lower_gamma if upper else regularized_upper_gamma
    below, above = (1.0, 0.0) if upper else (0.0, 1.0)
    if np.ndim(x) == 0:
        if x <= 0:
            return below
        if math.isinf(x):
            return above
        return fn(params.alpha, params.beta / x)
    x = np.asarray(x, dtype=float)
    out = np.where(x <= 0, below, above)
    inner = (x > 0) & np.isfinite(x)
    if inner.any():
        out[inner] = fn(params.alpha, params.beta / x[inner])
    return out


def inverse_gamma_cdf(x, params):
    """``Pr[X <= x] = Q(alpha, beta / x)``, zero for ``x <= 0``. Accepts arrays."""
    return _tail(x, params, upper=False)


def inverse_gamma_sf(x, params):
    """``Pr[X > x] = P(alpha, beta / x)``, free of cancellation in the upper tail."""
    return _tail(x, params, upper=True)


def inverse_gamma_quantile(p, params):
    """The ``x`` with ``inverse_gamma_cdf(x) = p`` for ``p`` in ``(0, 1)``."""
    if not 0 < p < 1:
        raise DomainError(f"probability must lie in (0, 1), got {p!r}")
    return params.beta / inverse_regularized_upper_gamma(params.alpha, p)


def inverse_gamma_sample(params, rng, size=None):
    """Draw ``beta / G`` with ``G ~ Gamma(alpha, 1)``."""
    return params.beta / rng.gamma(params.alpha, 1.0, size=size)


def fit_inverse_gamma(stats):
    """Moment-matched Inverse-Gamma parameters.

    ``alpha = mu^2 / v + 2`` and ``beta = (mu^2 / v + 1) mu`` reproduce the
    sample mean and variance exactly.
    """
    mu, v = stats.mu, stats.v
    if not (math.isfinite(mu) and math.isfinite(v)) or mu <= 0 or v <= 0:
        raise FitError(f"need positive finite mean and variance, got mu={mu!r}, v={v!r}")
    ratio = mu * mu / v
    return InverseGammaParams(ratio + 2.0, (ratio + 1.0) * mu, excess=ratio)


def sample_stats(samples):
    """Sample mean and unbiased sample variance.

    Sums are exactly rounded, so the result does not depend on sample order.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise DegenerateStatisticsError("need at least two samples")
    if not np.all(np.isfinite(x)):
        raise DomainError("samples must be finite")
    mu = math.fsum(x) / x.size
    v = math.fsum((x - mu) ** 2) / (x.size - 1)
    if v <= 0:
        raise DegenerateStatisticsError("all samples are equal")
    return SampleStats(mu, v, int(x.size))
