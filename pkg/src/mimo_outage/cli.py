"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 configuration error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .bayes import DegenerateStatisticsError, FitError, InverseGammaParams, fit_inverse_gamma, sample_stats
from .experiments import (
    ExperimentPlan,
    KnownTerms,
    baseline_curve,
    epsilon_outage_curve,
    run_drops,
    sinr_cdf_table,
    split_drops,
)
from .numerics import DomainError, SingularMatrixError
from .outage import epsilon_outage_rate
from .receiver import DegenerateCombinerError, Scheme, UatfTerms
from .scenario import ConfigError, SystemConfig

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

DEFAULTS = {
    "bandwidth_hz": 20e6,
    "n_antennas": 16,
    "pathloss_exponent": 3.76,
    "tx_power_mw": 100.0,
    "noise_power_dbm": -94.0,
    "tau_c": 200,
    "tau_p": 10,
    "r_desired_m": 100.0,
    "k_u": 20,
    "scheme": "RZF",
    "n_drops": 2000,
    "m_small_scale": 500,
    "calibration_fraction": 0.5,
    "epsilons": [0.05, 0.1, 0.2, 0.3],
    "margins": [1.0, 1.5, 2.0, 3.1, 5.0, 10.0],
    "seed": 0,
    "known_terms": "per_drop",
}

_INTS = {"n_antennas", "tau_c", "tau_p", "k_u", "n_drops", "m_small_scale", "seed"}
_REALS = {"bandwidth_hz", "pathloss_exponent", "tx_power_mw", "noise_power_dbm",
          "r_desired_m", "calibration_fraction"}

CSV_HEADERS = {
    "sinr-cdf": ("threshold_db", "empirical_cdf", "analytical_cdf"),
    "outage-curve": ("epsilon", "se_model", "empirical_outage"),
    "baseline-curve": ("margin", "se", "empirical_outage"),
}


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    config_path: str | None
    command: str
    seed: int
    output_dir: str
    version: str = __version__
    duration_s: float = 0.0
    outputs: list = field(default_factory=list)


def _coerce(key, value):
    if key in _INTS:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(value)
    if key in _REALS:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{key}: expected a finite number, got {value!r}")
        return float(value)
    if key == "scheme":
        try:
            return Scheme(str(value).upper())
        except ValueError:
            raise ConfigError(f"scheme: expected MR or RZF, got {value!r}") from None
    if key == "known_terms":
        try:
            return KnownTerms(value)
        except ValueError:
            raise ConfigError(f"known_terms: expected per_drop or calibration_mean, got {value!r}") from None
    if key in ("epsilons", "margins"):
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{key}: expected a non-empty list of numbers")
        return tuple(_coerce("calibration_fraction", v) for v in value)
    raise AssertionError(key)


def plan_from_dict(doc, seed=None):
    """Build a validated :class:`ExperimentPlan` from a config mapping."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    for key in doc:
        if key not in DEFAULTS:
            log.warning("ignoring unknown config key %r", key)
    values = {}
    for key, default in DEFAULTS.items():
        values[key] = _coerce(key, doc.get(key, default))
    if seed is not None:
        values["seed"] = int(seed)
    try:
        cfg = SystemConfig(
            n_antennas=values["n_antennas"],
            tau_c=values["tau_c"],
            tau_p=values["tau_p"],
            noise_power_dbm=values["noise_power_dbm"],
            bandwidth_hz=values["bandwidth_hz"],
            tx_power_mw=values["tx_power_mw"],
            pathloss_exponent=values["pathloss_exponent"],
            seed=values["seed"],
        )
    except ConfigError as exc:
        raise ConfigError(f"tau_c/tau_p/power settings: {exc}") from None
    plan = ExperimentPlan(
        cfg=cfg,
        r_desired_m=values["r_desired_m"],
        k_u=values["k_u"],
        scheme=values["scheme"],
        n_drops=values["n_drops"],
        m_small_scale=values["m_small_scale"],
        calibration_fraction=values["calibration_fraction"],
        epsilons=values["epsilons"],
        margins=values["margins"],
        known_terms=values["known_terms"],
    )
    return plan.validate()


def parse_config(path, seed=None):
    """Read a JSON config file; missing keys take the defaults in ``DEFAULTS``."""
    if path is None:
        return plan_from_dict({}, seed)
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None
    return plan_from_dict(doc, seed)


def _fmt(x):
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def read_samples(path):
    """Newline-delimited positive decimals; blank lines and ``#`` comments skipped."""
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: not a number: {text!r}") from None
        if not (math.isfinite(value) and value > 0):
            raise ConfigError(f"{path}:{lineno}: sample must be positive, got {text!r}")
        out.append(value)
    return out


def _emit_json(obj, out_dir, name):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out_dir is None:
        sys.stdout.write(text)
        return None
    path = Path(out_dir) / name
    path.write_text(text)
    return path


def _run_experiment(args):
    plan = parse_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    results = run_drops(plan, threads=args.threads)
    cal, held = split_drops(results, plan.calibration_fraction, plan.cfg.seed)
    mode = plan.known_terms
    if args.command == "sinr-cdf":
        rows = sinr_cdf_table(cal, held, known_terms=mode)
    elif args.command == "outage-curve":
        rows = epsilon_outage_curve(cal, held, plan.epsilons, plan.cfg, mode)
    else:
        rows = baseline_curve(cal, held, plan.margins, plan.cfg, mode)
    stem = args.command.replace("-", "_")
    csv_path = out / f"{stem}.csv"
    write_csv(csv_path, CSV_HEADERS[args.command], rows)
    manifest = RunManifest(
        config_path=str(args.config) if args.config else None,
        command=args.command,
        seed=plan.cfg.seed,
        output_dir=str(out),
        duration_s=time.perf_counter() - start,
        outputs=[csv_path.name],
    )
    (out / f"{stem}.manifest.json").write_text(json.dumps(manifest.__dict__, indent=2) + "\n")
    return EXIT_OK


def _run_fit(args):
    stats = sample_stats(read_samples(args.samples))
    ig = fit_inverse_gamma(stats)
    _emit_json({"mu": stats.mu, "v": stats.v, "alpha": ig.alpha, "beta": ig.beta}, args.out, "fit.json")
    return EXIT_OK


def _load_json(path, what):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {what} JSON {path}: {exc}") from None


def _run_rate(args):
    if not 0 < args.epsilon < 1:
        raise UsageError(f"--epsilon must lie in the open interval (0, 1), got {args.epsilon}")
    plan = parse_config(args.config, args.seed)
    fit = _load_json(args.fit, "fit")
    terms_doc = _load_json(args.terms, "terms")
    try:
        ig = InverseGammaParams(float(fit["alpha"]), float(fit["beta"]))
        terms = UatfTerms(
            ds_sq=float(terms_doc["ds_sq"]),
            iui_u=float(terms_doc.get("iui_u", 0.0)),
            iusi_n=float(terms_doc["iusi_n"]),
            noise_eff=float(terms_doc["noise_eff"]),
            n_realizations=int(terms_doc.get("n_realizations", 0)),
        )
    except KeyError as exc:
        raise ConfigError(f"missing key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    dec = epsilon_outage_rate(terms, ig, args.epsilon, plan.cfg)
    _emit_json({"epsilon": dec.epsilon, "threshold_T": dec.threshold_T, "se": dec.se}, args.out, "rate.json")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads for the drop loop")

    parser = _Parser(prog="mimo-outage", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, helptext in (
        ("sinr-cdf", "empirical vs analytical SINR CDF"),
        ("outage-curve", "epsilon-outage SE and achieved outage"),
        ("baseline-curve", "fixed-margin baseline SE and achieved outage"),
    ):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("fit", parents=[common], help="fit an Inverse-Gamma model to interference samples")
    p.add_argument("samples", help="file with one interference power (W) per line")
    p.add_argument("--out", help="output directory (default: stdout)")

    p = sub.add_parser("rate", parents=[common], help="epsilon-outage rate from a fit and UatF terms")
    p.add_argument("--fit", required=True, help="JSON produced by 'fit'")
    p.add_argument("--terms", required=True, help="JSON with ds_sq, iusi_n, noise_eff")
    p.add_argument("--epsilon", type=float, required=True, help="target outage in (0, 1)")
    p.add_argument("--out", help="output directory (default: stdout)")
    return parser


_COMMANDS = {
    "sinr-cdf": _run_experiment,
    "outage-curve": _run_experiment,
    "baseline-curve": _run_experiment,
    "fit": _run_fit,
    "rate": _run_rate,
}


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "out", None) is not None:
        Path(args.out).mkdir(parents=True, exist_ok=True)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, SingularMatrixError, DegenerateStatisticsError, FitError,
            DegenerateCombinerError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
