"""Drop orchestration and analytical-versus-empirical comparisons.

A drop redraws the unknown interferers (positions, shadowing, pilots) and
estimates the UatF terms of the desired UE over ``m_small_scale`` fading
realizations. Drops are split into a calibration set, which alone feeds the
Inverse-Gamma fit, and a held-out set on which empirical CDFs and outage
rates are measured.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bayes import fit_inverse_gamma, sample_stats
from .outage import baseline_rate, conditional_outage, epsilon_outage_rate
from .receiver import Scheme, UatfTerms, estimate_uatf_terms, sinr_and_se
from .scenario import ConfigError, SystemConfig, fixed_scenario, redraw_unknown, stream

__all__ = [
    "KnownTerms",
    "ExperimentPlan",
    "DropResult",
    "run_drops",
    "split_drops",
    "quasi_static_terms",
    "fit_calibration",
    "analytical_sinr_cdf",
    "empirical_cdf",
    "ks_distance",
    "sinr_cdf_table",
    "epsilon_outage_curve",
    "baseline_curve",
]

_DROP_STREAM = 3
_SPLIT_STREAM = 4


class KnownTerms(str, enum.Enum):
    """Where the model takes DS, IUSI and the effective noise from.

    ``per_drop``: each drop's own values, known to the serving BS for that
    transmission interval. ``calibration_mean``: one average over the
    calibration drops applied to every drop.
    """

    PER_DROP = "per_drop"
    CALIBRATION_MEAN = "calibration_mean"


@dataclass(frozen=True)
class ExperimentPlan:
    cfg: SystemConfig = field(default_factory=SystemConfig)
    r_desired_m: float = 100.0
    k_u: int = 20
    scheme: Scheme = Scheme.RZF
    n_drops: int = 2000
    m_small_scale: int = 500
    calibration_fraction: float = 0.5
    epsilons: tuple = (0.05, 0.1, 0.2, 0.3)
    margins: tuple = (1.0, 1.5, 2.0, 3.1, 5.0, 10.0)
    known_terms: KnownTerms = KnownTerms.PER_DROP

    def validate(self):
        """Check the sizing rules for a statistically meaningful experiment."""
        if self.n_drops < 100:
            raise ConfigError("n_drops must be at least 100")
        if not 0 < self.calibration_fraction < 1:
            raise ConfigError("calibration_fraction must lie in (0, 1)")
        if self.calibration_fraction * self.n_drops < 50:
            raise ConfigError("calibration set needs at least 50 drops")
        if self.m_small_scale < 2:
            raise ConfigError("m_small_scale must be at least 2")
        if self.k_u < 0 or not self.r_desired_m > 0:
            raise ConfigError("k_u must be nonnegative and r_desired_m positive")
        if any(not 0 < e < 1 for e in self.epsilons):
            raise ConfigError("epsilons must lie in (0, 1)")
        if any(not m >= 1 for m in self.margins):
            raise ConfigError("margins must be at least 1")
        return self


@dataclass(frozen=True)
class DropResult:
    drop_index: int
    terms: UatfTerms
    sinr: float
    se: float


def run_drops(plan, threads=1):
    """Simulate ``plan.n_drops`` drops.

    Drop ``d`` draws from its own stream ``(seed, d)``, so results do not
    depend on ``threads`` or on scheduling order.
    """
    cfg = plan.cfg
    base = fixed_scenario(cfg, plan.r_desired_m)

    def one(d):
        rng = stream(cfg.seed, _DROP_STREAM, d)
        scenario = redraw_unknown(cfg, base, plan.r_desired_m, plan.k_u, rng)
        terms = estimate_uatf_terms(scenario, cfg, plan.scheme, plan.m_small_scale, rng)
        sinr, se = sinr_and_se(terms, cfg)
        return DropResult(d, terms, sinr, se)

    if threads <= 1:
        return [one(d) for d in range(plan.n_drops)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(plan.n_drops)))


def split_drops(results, calibration_fraction, seed):
    """Seeded disjoint split into ``(calibration, held_out)``, each in drop order."""
    n = len(results)
    n_cal = int(round(calibration_fraction * n))
    if not 0 < n_cal < n:
        raise ConfigError("split leaves an empty calibration or held-out set")
    perm = stream(seed, _SPLIT_STREAM).permutation(n)
    cal = np.sort(perm[:n_cal])
    held = np.sort(perm[n_cal:])
    return [results[i] for i in cal], [results[i] for i in held]


def quasi_static_terms(calibration):
    """Calibration averages of every term; ``iui_u`` is the sample mean."""
    t = [r.terms for r in calibration]
    avg = lambda name: math.fsum(getattr(x, name) for x in t) / len(t)  # noqa: E731
    return UatfTerms(avg("ds_sq"), avg("iui_u"), avg("iusi_n"), avg("noise_eff"),
                     sum(x.n_realizations for x in t), avg("iusi_raw"))


def fit_calibration(calibration):
    """Moment-matched Inverse-Gamma fit to the calibration drops' unknown interference."""
    return fit_inverse_gamma(sample_stats([r.terms.iui_u for r in calibration]))


def _known_terms(calibration, held_out, mode):
    # (ds_sq, iusi_n, noise_eff) as arrays over the drops the model is applied to
    mode = KnownTerms(mode)
    if mode is KnownTerms.CALIBRATION_MEAN:
        q = quasi_static_terms(calibration)
        return np.array([q.ds_sq]), np.array([q.iusi_n]), np.array([q.noise_eff])
    cols = [(r.terms.ds_sq, r.terms.iusi_n, r.terms.noise_eff) for r in held_out]
    return tuple(np.array(c) for c in zip(*cols))


def analytical_sinr_cdf(calibration, held_out, grid, known_terms=KnownTerms.PER_DROP):
    """Model SINR CDF ``[(T, Pr[SINR <= T]), ...]`` on the given thresholds.

    With ``per_drop`` known terms the CDF is the average of the conditional
    outage probabilities of the held-out drops; only their unknown
    interference is replaced by the calibration fit.
    """
    ig = fit_calibration(calibration)
    ds, iusi, noise = _known_terms(calibration, held_out, known_terms)
    return [(float(T), float(np.mean(conditional_outage(ds, iusi, noise, ig, T)))) for T in grid]


def empirical_cdf(results, grid):
    """Fraction of drops with ``sinr <= T`` for each ``T`` in ``grid``."""
    s = np.sort([r.sinr for r in results])
    counts = np.searchsorted(s, np.asarray(grid, dtype=float), side="right")
    return [(float(T), c / len(s)) for T, c in zip(grid, counts)]


def ks_distance(calibration, held_out, known_terms=KnownTerms.PER_DROP):
    """Kolmogorov-Smirnov distance between the model CDF and the held-out SINRs."""
    s = np.sort([r.sinr for r in held_out])
    n = len(s)
    F = np.array([p for _, p in analytical_sinr_cdf(calibration, held_out, s, known_terms)])
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def sinr_cdf_table(calibration, held_out, n_points=200, known_terms=KnownTerms.PER_DROP):
    """Rows ``(threshold_db, empirical_cdf, analytical_cdf)`` over the held-out SINR range."""
    db = 10.0 * np.log10([r.sinr for r in held_out])
    lo, hi = math.floor(db.min()) - 1.0, math.ceil(db.max()) + 1.0
    grid_db = np.linspace(lo, hi, n_points)
    grid = 10.0 ** (grid_db / 10.0)
    emp = empirical_cdf(held_out, grid)
    ana = analytical_sinr_cdf(calibration, held_out, grid, known_terms)
    return [(float(g), e, a) for g, (_, e), (_, a) in zip(grid_db, emp, ana)]


def epsilon_outage_curve(calibration, held_out, epsilons, cfg, known_terms=KnownTerms.PER_DROP):
    """Rows ``(epsilon, se_model, empirical_outage)``.

    The Inverse-Gamma model comes from calibration drops only. With
    ``per_drop`` known terms every held-out drop gets its own rate and
    ``se_model`` is their mean; otherwise one rate serves all drops.
    """
    ig = fit_calibration(calibration)
    mode = KnownTerms(known_terms)
    rows = []
    for eps in epsilons:
        if mode is KnownTerms.CALIBRATION_MEAN:
            dec = [epsilon_outage_rate(quasi_static_terms(calibration), ig, eps, cfg)] * len(held_out)
        else:
            dec = [epsilon_outage_rate(r.terms, ig, eps, cfg) for r in held_out]
        out = sum(r.sinr <= d.threshold_T for r, d in zip(held_out, dec)) / len(held_out)
        rows.append((float(eps), math.fsum(d.se for d in dec) / len(dec), out))
    return rows


def baseline_curve(calibration, held_out, margins, cfg, known_terms=KnownTerms.PER_DROP):
    """Rows ``(margin, se_bl, empirical_outage)`` for the fixed-margin baseline."""
    mode = KnownTerms(known_terms)
    rows = []
    for m in margins:
        if mode is KnownTerms.CALIBRATION_MEAN:
            dec = [baseline_rate(quasi_static_terms(calibration), m, cfg)] * len(held_out)
        else:
            dec = [baseline_rate(r.terms, m, cfg) for r in held_out]
        out = sum(r.sinr <= d.sinr_bl / m for r, d in zip(held_out, dec)) / len(held_out)
        rows.append((float(m), math.fsum(d.se for d in dec) / len(dec), out))
    return rows
