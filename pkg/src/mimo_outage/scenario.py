"""Network geometry, large-scale fading, spatial correlation and pilots.

One serving BS sits at the origin with a half-wavelength ULA whose broadside
points along the +x axis. The desired UE and ``K_n`` known interferers have
frozen positions and shadowing; only the unknown interferers are redrawn
per drop.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .numerics import DomainError, psd_factor

__all__ = [
    "ConfigError",
    "Category",
    "SystemConfig",
    "UeRecord",
    "ChannelStats",
    "Scenario",
    "build_scenario",
    "assign_pilots",
    "large_scale_fading",
    "shadowing_covariance",
    "spatial_correlation",
    "redraw_unknown",
    "stream",
    "fixed_scenario",
    "make_scenario",
]


class ConfigError(ValueError):
    """Invalid system or experiment configuration."""


class Category(str, enum.Enum):
    DESIRED = "desired"
    KNOWN = "known"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SystemConfig:
    """Radio and frame constants plus the reconstructed propagation model.

    The first block mirrors the network parameter table; the rest are model
    constants that the published setup leaves to a cited reference and are
    kept configurable here.
    """

    n_antennas: int = 16
    tau_c: int = 200
    tau_p: int = 10
    noise_power_dbm: float = -94.0
    bandwidth_hz: float = 20e6
    tx_power_mw: float = 100.0
    pathloss_exponent: float = 3.76
    seed: int = 0

    pathloss_intercept_db: float = -35.3
    shadow_std_db: float = 4.0
    shadow_decorrelation_m: float = 9.0
    angular_spread_deg: float = 15.0
    desired_angle_deg: float = 0.0
    known_radii_m: tuple = (60.0, 100.0, 140.0, 180.0, 220.0)
    unknown_inner_m: float = 250.0
    unknown_outer_m: float = 500.0

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ConfigError("n_antennas must be positive")
        if self.tau_p < 1 or self.tau_c <= self.tau_p:
            raise ConfigError("tau_p must satisfy 0 < tau_p < tau_c")
        if self.tau_p < len(self.known_radii_m) + 1:
            raise ConfigError("tau_p must cover the desired UE and every known interferer")
        if not self.tx_power_mw > 0 or not self.bandwidth_hz > 0:
            raise ConfigError("powers and bandwidth must be positive")
        if not 0 < self.unknown_inner_m < self.unknown_outer_m:
            raise ConfigError("unknown annulus radii must satisfy 0 < inner < outer")

    @property
    def tau_u(self):
        return self.tau_c - self.tau_p

    @property
    def prelog(self):
        return self.tau_u / self.tau_c

    @property
    def noise_power_w(self):
        return 10.0 ** (self.noise_power_dbm / 10.0) * 1e-3

    @property
    def tx_power_w(self):
        return self.tx_power_mw * 1e-3

    @property
    def n_known(self):
        return len(self.known_radii_m)


@dataclass(frozen=True)
class UeRecord:
    id: int
    category: Category
    position: tuple
    pilot_index: int = -1
    power_mw: float = 100.0

    @property
    def distance(self):
        return math.hypot(*self.position)

    @property
    def angle(self):
        return math.atan2(self.position[1], self.position[0])

    @property
    def power_w(self):
        return self.power_mw * 1e-3


@dataclass(frozen=True)
class ChannelStats:
    ue_id: int
    R: np.ndarray = field(repr=False)
    beta: float

    def factor(self):
        return psd_factor(self.R)


@dataclass
class Scenario:
    """A UE population plus the per-UE channel statistics of one drop."""

    ues: list
    stats: list
    shadowing_db: np.ndarray = field(repr=False)

    def by_category(self, category):
        return [i for i, ue in enumerate(self.ues) if ue.category == category]

    @property
    def desired(self):
        return self.by_category(Category.DESIRED)[0]

    @property
    def known(self):
        """Indices of the desired-cell UEs (desired first), i.e. D_n."""
        return self.by_category(Category.DESIRED) + self.by_category(Category.KNOWN)

    @property
    def unknown(self):
        return self.by_category(Category.UNKNOWN)


def stream(seed, *key):
    """Independent child generator for ``(seed, *key)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def assign_pilots(ues, tau_p, rng):
    """Orthogonal pilots for the desired cell, uniform random for the rest.

    Desired and known UEs receive pilots ``0, 1, ...`` in list order (the
    desired UE first); every unknown UE draws its pilot uniformly from
    ``[0, tau_p)``.
    """
    in_cell = [ue for ue in ues if ue.category != Category.UNKNOWN]
    if len(in_cell) > tau_p:
        raise ConfigError(f"{len(in_cell)} desired-cell UEs need more than tau_p={tau_p} pilots")
    order = sorted(in_cell, key=lambda ue: ue.category != Category.DESIRED)
    pilots = {ue.id: t for t, ue in enumerate(order)}
    out = []
    for ue in ues:
        if ue.category == Category.UNKNOWN:
            out.append(replace(ue, pilot_index=int(rng.integers(tau_p))))
        else:
            out.append(replace(ue, pilot_index=pilots[ue.id]))
    return out


def _annulus_positions(n, r_in, r_out, rng):
    # area-uniform: d^2 uniform on [r_in^2, r_out^2]
    d = np.sqrt(rng.uniform(r_in**2, r_out**2, size=n))
    phi = rng.uniform(-np.pi, np.pi, size=n)
    return np.column_stack([d * np.cos(phi), d * np.sin(phi)])


def _fixed_ues(cfg, r_desired_m):
    if not r_desired_m > 0:
        raise DomainError("desired UE distance must be positive")
    geo = stream(cfg.seed, 0)
    known_angles = geo.uniform(-np.pi, np.pi, size=cfg.n_known)
    phi0 = math.radians(cfg.desired_angle_deg)
    ues = [UeRecord(0, Category.DESIRED, (r_desired_m * math.cos(phi0), r_desired_m * math.sin(phi0)),
                    power_mw=cfg.tx_power_mw)]
    for k, (r, phi) in enumerate(zip(cfg.known_radii_m, known_angles), start=1):
        ues.append(UeRecord(k, Category.KNOWN, (r * math.cos(phi), r * math.sin(phi)),
                            power_mw=cfg.tx_power_mw))
    return ues


def _unknown_ues(cfg, k_u, rng, first_id):
    pos = _annulus_positions(k_u, cfg.unknown_inner_m, cfg.unknown_outer_m, rng)
    return [UeRecord(first_id + i, Category.UNKNOWN, (float(x), float(y)), power_mw=cfg.tx_power_mw)
            for i, (x, y) in enumerate(pos)]


def build_scenario(cfg, r_desired_m, k_u, rng):
    """Drop the desired UE, the known interferers and ``k_u`` unknown interferers.

    The desired and known geometry depends on ``cfg.seed`` only, so it is the
    same for every drop of an experiment; ``rng`` drives the unknown UEs and
    their pilot picks.
    """
    if k_u < 0:
        raise DomainError("k_u must be nonnegative")
    ues = _fixed_ues(cfg, r_desired_m)
    ues += _unknown_ues(cfg, k_u, rng, len(ues))
    return assign_pilots(ues, cfg.tau_p, rng)


def shadowing_covariance(positions, cfg):
    """Shadow-fading covariance in dB^2: ``std^2 * 2^(-distance / d_corr)``."""
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    delta = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)
    return cfg.shadow_std_db**2 * 2.0 ** (-delta / cfg.shadow_decorrelation_m)


def _pathloss_db(d, cfg):
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise DomainError("UE located at the base station (distance 0)")
    return cfg.pathloss_intercept_db - 10.0 * cfg.pathloss_exponent * np.log10(d)


def _gaussian(cov, rng):
    L = np.real(psd_factor(cov, tol=1e-8))
    return L @ rng.standard_normal(cov.shape[0])


def large_scale_fading(ues, cfg, rng, frozen_shadowing=None):
    """Average channel gains ``beta_k`` (linear) and the shadowing used.

    Parameters
    ----------
    ues : list of UeRecord
    cfg : SystemConfig
    rng : numpy.random.Generator
    frozen_shadowing : dict, optional
        ``ue_id -> shadowing in dB`` for UEs whose shadowing is already
        fixed. The remaining UEs are drawn from the joint Gaussian
        conditioned on these values.

    Returns
    -------
    beta : dict
        ``ue_id -> beta`` (linear scale).
    shadowing : dict
        ``ue_id -> shadowing in dB`` for every UE.
    """
    frozen_shadowing = frozen_shadowing or {}
    pos = np.array([ue.position for ue in ues], dtype=float).reshape(-1, 2)
    pl = _pathloss_db(np.linalg.norm(pos, axis=1), cfg)
    cov = shadowing_covariance(pos, cfg)

    fixed = np.array([ue.id in frozen_shadowing for ue in ues], dtype=bool)
    free = ~fixed
    F = np.zeros(len(ues))
    if fixed.any():
        F[fixed] = [frozen_shadowing[ue.id] for ue, f in zip(ues, fixed) if f]
    if free.any():
        if fixed.any():
            c_ff = cov[np.ix_(fixed, fixed)]
            c_uf = cov[np.ix_(free, fixed)]
            gain = np.linalg.solve(c_ff, c_uf.T).T
            mean = gain @ F[fixed]
            ccov = cov[np.ix_(free, free)] - gain @ c_uf.T
            F[free] = mean + _gaussian(0.5 * (ccov + ccov.T), rng)
        else:
            F[free] = _gaussian(cov, rng)

    beta_db = pl + F
    beta = {ue.id: 10.0 ** (b / 10.0) for ue, b in zip(ues, beta_db)}
    shadowing = {ue.id: float(f) for ue, f in zip(ues, F)}
    return beta, shadowing


def spatial_correlation(ue, beta, cfg, angular_spread_deg=None):
    """Local-scattering correlation matrix for a half-wavelength ULA.

    Entry ``(m, n)`` is ``beta * E[exp(j pi (m - n) sin(phi))]`` with
    ``phi ~ N(theta, sigma^2)`` around the UE bearing ``theta``, using the
    small-spread Gaussian closed form. ``sigma = 0`` gives the rank-one
    line-of-sight matrix.
    """
    if not beta > 0:
        raise DomainError("beta must be positive")
    sigma = math.radians(cfg.angular_spread_deg if angular_spread_deg is None else angular_spread_deg)
    theta = ue.angle
    d = np.arange(cfg.n_antennas)
    diff = d[:, None] - d[None, :]
    R = beta * np.exp(1j * np.pi * diff * math.sin(theta)) * np.exp(
        -0.5 * sigma**2 * (np.pi * diff * math.cos(theta)) ** 2
    )
    return ChannelStats(ue.id, R, float(beta))


def redraw_unknown(cfg, base, r_desired_m, k_u, rng):
    """Build a new drop that keeps the desired/known state of ``base``.

    ``base`` is a :class:`Scenario` whose first ``1 + K_n`` UEs are the
    desired and known UEs; their positions, pilots, shadowing and correlation
    matrices are reused verbatim.
    """
    n_fixed = 1 + cfg.n_known
    fixed_ues = base.ues[:n_fixed]
    unknown = _unknown_ues(cfg, k_u, rng, n_fixed)
    unknown = [replace(ue, pilot_index=int(rng.integers(cfg.tau_p))) for ue in unknown]
    ues = fixed_ues + unknown
    frozen = {ue.id: float(base.shadowing_db[i]) for i, ue in enumerate(fixed_ues)}
    beta, shadow = large_scale_fading(ues, cfg, rng, frozen_shadowing=frozen)
    stats = list(base.stats[:n_fixed]) + [spatial_correlation(ue, beta[ue.id], cfg) for ue in unknown]
    return Scenario(ues, stats, np.array([shadow[ue.id] for ue in ues]))


def fixed_scenario(cfg, r_desired_m):
    """Desired and known UEs with their frozen shadowing, no unknown UEs."""
    ues = assign_pilots(_fixed_ues(cfg, r_desired_m), cfg.tau_p, stream(cfg.seed, 1))
    beta, shadow = large_scale_fading(ues, cfg, stream(cfg.seed, 2))
    stats = [spatial_correlation(ue, beta[ue.id], cfg) for ue in ues]
    return Scenario(ues, stats, np.array([shadow[ue.id] for ue in ues]))


def make_scenario(cfg, r_desired_m, k_u, rng):
    """One full drop: fixed desired/known state plus freshly drawn unknown UEs."""
    return redraw_unknown(cfg, fixed_scenario(cfg, r_desired_m), r_desired_m, k_u, rng)
