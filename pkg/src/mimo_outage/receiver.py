"""Receive combining and Monte Carlo evaluation of the UatF SINR terms."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import draw_channels, estimator_matrix, pilot_observations
from .numerics import hermitian_solve

__all__ = [
    "Scheme",
    "DegenerateCombinerError",
    "Combiner",
    "UatfTerms",
    "mr_combiner",
    "rzf_combiner",
    "uatf_terms",
    "estimate_uatf_terms",
    "sinr_and_se",
]


class Scheme(str, enum.Enum):
    MR = "MR"
    RZF = "RZF"


class DegenerateCombinerError(ArithmeticError):
    """A channel estimate is exactly zero, so MR combining is undefined."""


@dataclass
class Combiner:
    ue_id: int
    v: np.ndarray = field(repr=False)
    scheme: Scheme


@dataclass(frozen=True)
class UatfTerms:
    """Expectation terms of the use-and-then-forget SINR for one UE.

    ``iusi_raw`` keeps the unclamped value of the in-cell term; Monte Carlo
    noise can push it slightly below zero.
    """

    ds_sq: float
    iui_u: float
    iusi_n: float
    noise_eff: float
    n_realizations: int
    iusi_raw: float = float("nan")

    def __post_init__(self):
        for name in ("ds_sq", "iui_u", "iusi_n", "noise_eff"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {value!r}")


def mr_combiner(h_hat, ue_id=0):
    """``v = h_hat / ||h_hat||^2``; works on ``(N,)`` or batched ``(M, N)``."""
    h_hat = np.asarray(h_hat)
    norm_sq = np.sum(np.abs(h_hat) ** 2, axis=-1, keepdims=True)
    if np.any(norm_sq == 0):
        raise DegenerateCombinerError("zero channel estimate")
    return Combiner(ue_id, h_hat / norm_sq, Scheme.MR)


def rzf_combiner(h_hats, powers, sigma2, target=0, ue_id=0):
    """Partial RZF over the desired-cell estimates.

    Parameters
    ----------
    h_hats : ndarray, shape (K_n + 1, N) or (M, K_n + 1, N)
        Estimates of every UE in the desired cell.
    powers : array_like, shape (K_n + 1,)
        Transmit powers in watts.
    sigma2 : float
        Noise power in watts; must be positive.
    target : int
        Row of ``h_hats`` holding the UE being detected.
    """
    H = np.asarray(h_hats)
    p = np.asarray(powers, dtype=float)
    n = H.shape[-1]
    C = np.matmul(np.swapaxes(H * p[:, None], -1, -2), np.conj(H)) + sigma2 * np.eye(n)
    v = hermitian_solve(C, p[target] * H[..., target, :])
    return Combiner(ue_id, v, Scheme.RZF)


def uatf_terms(v, h, powers, desired, known, unknown, sigma2):
    """Sample-mean UatF terms from paired realizations.

    Parameters
    ----------
    v : ndarray, shape (M, N)
        Combiner of the desired UE in every realization.
    h : ndarray, shape (M, K, N)
        True channels of all UEs in the same realizations.
    powers : ndarray, shape (K,)
    desired : int
    known, unknown : sequence of int
        Column indices of D_n (including ``desired``) and D_u.
    """
    g = np.matmul(h, np.conj(v)[..., None])[..., 0]
    gain = np.mean(np.abs(g) ** 2, axis=0) * powers
    mean_self = np.mean(g[:, desired])
    ds_sq = powers[desired] * abs(mean_self) ** 2
    iui = float(np.sum(gain[list(unknown)])) if len(unknown) else 0.0
    iusi_raw = float(np.sum(gain[list(known)]) - ds_sq)
    noise = sigma2 * float(np.mean(np.sum(np.abs(v) ** 2, axis=-1)))
    return UatfTerms(float(ds_sq), iui, max(iusi_raw, 0.0), noise, v.shape[0], iusi_raw)


def estimate_uatf_terms(scenario, cfg, scheme, m, rng):
    """Monte Carlo UatF terms for the desired UE of ``scenario``.

    Every term is averaged over the same ``m`` coherence blocks, each with
    its own pilot observation, channel estimates and combiner.
    """
    if m < 2:
        raise ValueError("need at least two realizations")
    scheme = Scheme(scheme)
    ues = scenario.ues
    known = scenario.known
    unknown = scenario.unknown
    desired = scenario.desired
    powers = np.array([ue.power_w for ue in ues])
    sigma2 = cfg.noise_power_w

    real = draw_channels(scenario.stats, cfg, rng, size=m)
    Y = pilot_observations(real, ues, cfg)
    H_hat = np.stack(
        [Y[:, ues[i].pilot_index, :] @ estimator_matrix(scenario.stats[i], powers[i], cfg).T for i in known],
        axis=1,
    )
    target = known.index(desired)
    if scheme is Scheme.MR:
        comb = mr_combiner(H_hat[:, target, :], ues[desired].id)
    else:
        comb = rzf_combiner(H_hat, powers[known], sigma2, target, ues[desired].id)
    return uatf_terms(comb.v, real.h, powers, desired, known, unknown, sigma2)


def sinr_and_se(terms, cfg):
    """Effective SINR and the achievable SE ``(tau_u / tau_c) log2(1 + SINR)``."""
    if not terms.noise_eff > 0:
        raise ValueError("effective noise must be positive")
    sinr = terms.ds_sq / (terms.iui_u + terms.iusi_n + terms.noise_eff)
    return sinr, cfg.prelog * math.log2(1.0 + sinr)
