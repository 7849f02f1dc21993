"""Small-scale fading, pilot observations and channel estimation.

All arrays carry an optional leading realization axis so a whole batch of
coherence blocks is drawn and processed at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import complex_normal, hermitian_solve, psd_factor

__all__ = [
    "ChannelRealization",
    "ChannelEstimate",
    "draw_channels",
    "pilot_observation",
    "pilot_observations",
    "estimate_channel",
    "estimator_matrix",
]


@dataclass
class ChannelRealization:
    """Channels ``h`` of shape ``(M, K, N)`` and pilot noise ``(M, tau_p, N)``."""

    h: np.ndarray = field(repr=False)
    pilot_noise: np.ndarray = field(repr=False)

    @property
    def n_realizations(self):
        return self.h.shape[0]


@dataclass
class ChannelEstimate:
    ue_id: int
    h_hat: np.ndarray = field(repr=False)


def draw_channels(stats, cfg, rng, size=1):
    """Draw ``size`` independent coherence blocks.

    Each ``h_k ~ CN(0, R_k)`` independently across UEs and blocks, and the
    pilot noise is ``CN(0, sigma^2 I)`` per pilot.
    """
    n = cfg.n_antennas
    L = psd_factor(np.stack([s.R for s in stats]))
    z = complex_normal(rng, (size, len(stats), n))
    h = np.matmul(L, z.transpose(1, 2, 0)).transpose(2, 0, 1)
    noise = math.sqrt(cfg.noise_power_w) * complex_normal(rng, (size, cfg.tau_p, n))
    return ChannelRealization(h, noise)


def pilot_observations(realization, ues, cfg):
    """Despread pilot signals for every pilot, shape ``(M, tau_p, N)``."""
    pilots = np.array([ue.pilot_index for ue in ues])
    amp = np.sqrt(cfg.tau_p * np.array([ue.power_w for ue in ues]))
    onehot = (pilots[:, None] == np.arange(cfg.tau_p)[None, :]) * amp[:, None]
    y = np.tensordot(onehot.astype(complex), realization.h, axes=([0], [1]))
    return y.transpose(1, 0, 2) + realization.pilot_noise


def pilot_observation(realization, ues, pilot_t, cfg):
    """Sum of ``sqrt(tau_p p_i) h_i`` over UEs on ``pilot_t`` plus that pilot's noise."""
    y = realization.pilot_noise[:, pilot_t, :].copy()
    for k, ue in enumerate(ues):
        if ue.pilot_index == pilot_t:
            y += math.sqrt(cfg.tau_p * ue.power_w) * realization.h[:, k, :]
    return y


def estimator_matrix(stats_k, p_k, cfg):
    """``sqrt(tau_p p_k) R_k (tau_p p_k R_k + sigma^2 I)^-1`` as a dense matrix."""
    c = cfg.tau_p * p_k
    B = c * stats_k.R + cfg.noise_power_w * np.eye(cfg.n_antennas)
    # R and B commute, so R B^-1 = B^-1 R
    return math.sqrt(c) * hermitian_solve(B, stats_k.R)


def estimate_channel(y_t_p, stats_k, p_k, cfg):
    """Estimate a known UE's channel from its pilot observation.

    Uses only the UE's own statistics: pilot contamination from unknown UEs
    enters through ``y_t_p`` but is not modeled in the filter.

    Parameters
    ----------
    y_t_p : ndarray, shape (N,) or (M, N)
    stats_k : ChannelStats
    p_k : float
        Transmit power in watts.
    """
    y = np.asarray(y_t_p)
    c = cfg.tau_p * p_k
    B = c * stats_k.R + cfg.noise_power_w * np.eye(cfg.n_antennas)
    rhs = y.T if y.ndim > 1 else y
    sol = hermitian_solve(B, rhs)
    h_hat = math.sqrt(c) * (stats_k.R @ sol)
    return ChannelEstimate(stats_k.ue_id, h_hat.T if y.ndim > 1 else h_hat)
