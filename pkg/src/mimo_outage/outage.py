"""Outage probability, epsilon-outage rate selection and the fixed-margin baseline.

Everything except the unknown interference power is treated as a known,
quasi-static value; the unknown part follows a fitted Inverse-Gamma law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bayes import fit_inverse_gamma, inverse_gamma_quantile, inverse_gamma_sf, sample_stats
from .numerics import DomainError

__all__ = [
    "RateDecision",
    "BaselineDecision",
    "outage_probability",
    "conditional_outage",
    "epsilon_outage_rate",
    "baseline_rate",
    "rate_adaptation_procedure",
]


@dataclass(frozen=True)
class RateDecision:
    epsilon: float
    threshold_T: float
    se: float


@dataclass(frozen=True)
class BaselineDecision:
    margin_m: float
    sinr_bl: float
    se: float


def outage_probability(terms, ig, T):
    """``Pr[SINR <= T]`` when the unknown interference is ``InverseGamma(ig)``.

    The outage event is ``IUI >= ds_sq / T - iusi_n - noise_eff``; a
    nonpositive right-hand side means outage is certain.
    """
    return conditional_outage(terms.ds_sq, terms.iusi_n, terms.noise_eff, ig, T)


def conditional_outage(ds_sq, iusi_n, noise_eff, ig, T):
    """Array form of :func:`outage_probability`; arguments broadcast."""
    T = np.asarray(T, dtype=float)
    if np.any(~(T > 0)):
        raise DomainError("threshold must be positive")
    z = np.asarray(ds_sq) / T - np.asarray(iusi_n) - np.asarray(noise_eff)
    # sf already returns 1 for z <= 0
    p = inverse_gamma_sf(z, ig)
    return float(p) if np.ndim(p) == 0 else p


def epsilon_outage_rate(terms, ig, epsilon, cfg):
    """Largest SINR threshold (and its SE) whose outage probability is ``epsilon``."""
    if not 0 < epsilon < 1:
        raise DomainError(f"target outage must lie in (0, 1), got {epsilon!r}")
    iui = inverse_gamma_quantile(1.0 - epsilon, ig)
    T = terms.ds_sq / (iui + terms.iusi_n + terms.noise_eff)
    return RateDecision(float(epsilon), T, cfg.prelog * math.log2(1.0 + T))


def baseline_rate(terms, margin_m, cfg):
    """Interference-unaware SINR divided by a fixed fade margin ``m >= 1``."""
    if not margin_m >= 1:
        raise DomainError(f"margin must be at least 1, got {margin_m!r}")
    sinr_bl = terms.ds_sq / (terms.iusi_n + terms.noise_eff)
    return BaselineDecision(float(margin_m), sinr_bl, cfg.prelog * math.log2(1.0 + sinr_bl / margin_m))


def rate_adaptation_procedure(interference_samples, terms, epsilon, cfg):
    """Measured interference powers to an epsilon-outage rate.

    Sample moments, then the moment-matched Inverse-Gamma fit, then the
    threshold from its ``1 - epsilon`` quantile.
    """
    ig = fit_inverse_gamma(sample_stats(interference_samples))
    return epsilon_outage_rate(terms, ig, epsilon, cfg)
