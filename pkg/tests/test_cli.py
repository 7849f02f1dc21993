import json
import logging
import subprocess
import sys

import pytest
from numpy.testing import assert_allclose

from mimo_outage.cli import DEFAULTS, main, parse_config, plan_from_dict
from mimo_outage.experiments import KnownTerms
from mimo_outage.receiver import Scheme
from mimo_outage.scenario import ConfigError

SMALL = {"n_drops": 100, "m_small_scale": 8, "k_u": 5}


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


class TestConfig:
    def test_empty_object_gives_defaults(self, tmp_path):
        plan = parse_config(write_config(tmp_path, {}))
        cfg = plan.cfg
        assert (cfg.n_antennas, cfg.tau_c, cfg.tau_p) == (16, 200, 10)
        assert (cfg.bandwidth_hz, cfg.tx_power_mw, cfg.noise_power_dbm, cfg.pathloss_exponent) == (20e6, 100.0, -94.0, 3.76)
        assert (plan.r_desired_m, plan.k_u, plan.scheme) == (100.0, 20, Scheme.RZF)
        assert (plan.n_drops, plan.m_small_scale, plan.calibration_fraction) == (2000, 500, 0.5)
        assert plan.epsilons == (0.05, 0.1, 0.2, 0.3)
        assert plan.known_terms is KnownTerms.PER_DROP
        assert set(DEFAULTS) >= {"bandwidth_hz", "n_antennas", "pathloss_exponent", "tx_power_mw",
                                 "noise_power_dbm", "tau_c", "tau_p", "r_desired_m", "k_u", "scheme",
                                 "n_drops", "m_small_scale", "calibration_fraction", "epsilons", "margins", "seed"}

    def test_pilot_length_too_long(self, tmp_path):
        with pytest.raises(ConfigError):
            plan_from_dict({"tau_p": 200})
        assert main(["sinr-cdf", "--config", write_config(tmp_path, {"tau_p": 250}), "--out", str(tmp_path)]) == 2

    def test_unknown_key_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            plan = plan_from_dict({"antenna_count": 8})
        assert plan.cfg.n_antennas == 16
        assert "antenna_count" in caplog.text

    @pytest.mark.parametrize("doc", [{"n_antennas": "many"}, {"scheme": "ZF"}, {"n_drops": 1.5},
                                     {"epsilons": []}, {"known_terms": "oracle"}, []])
    def test_invalid_values(self, doc):
        with pytest.raises(ConfigError):
            plan_from_dict(doc)

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert main(["outage-curve", "--config", str(path), "--out", str(tmp_path)]) == 2

    def test_seed_override(self):
        assert plan_from_dict({"seed": 3}, seed=9).cfg.seed == 9


class TestFitAndRate:
    def test_fit_example(self, tmp_path, capsys):
        samples = tmp_path / "s.txt"
        samples.write_text("# interference powers\n1\n2\n\n3\n")
        assert main(["fit", str(samples)]) == 0
        assert json.loads(capsys.readouterr().out) == {"mu": 2.0, "v": 1.0, "alpha": 6.0, "beta": 10.0}

    def test_fit_to_file(self, tmp_path):
        samples = tmp_path / "s.txt"
        samples.write_text("1\n2\n3\n")
        assert main(["fit", str(samples), "--out", str(tmp_path / "o")]) == 0
        assert json.loads((tmp_path / "o" / "fit.json").read_text())["alpha"] == 6.0

    def test_fit_degenerate(self, tmp_path):
        samples = tmp_path / "s.txt"
        samples.write_text("2\n2\n")
        assert main(["fit", str(samples)]) == 3

    def test_fit_rejects_nonpositive(self, tmp_path):
        samples = tmp_path / "s.txt"
        samples.write_text("2\n-1\n")
        assert main(["fit", str(samples)]) == 2

    def rate_files(self, tmp_path):
        fit = tmp_path / "fit.json"
        fit.write_text(json.dumps({"alpha": 1.0, "beta": 0.2}))
        terms = tmp_path / "terms.json"
        terms.write_text(json.dumps({"ds_sq": 1.0, "iusi_n": 0.0, "noise_eff": 0.1}))
        return str(fit), str(terms)

    def test_rate(self, tmp_path, capsys):
        fit, terms = self.rate_files(tmp_path)
        assert main(["rate", "--fit", fit, "--terms", terms, "--epsilon", "0.6321205588285577"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert_allclose(out["threshold_T"], 1 / 0.3, rtol=1e-12)

    @pytest.mark.parametrize("eps", ["0", "1", "-0.2"])
    def test_rate_epsilon_out_of_range(self, tmp_path, eps):
        fit, terms = self.rate_files(tmp_path)
        assert main(["rate", "--fit", fit, "--terms", terms, "--epsilon", eps]) == 1

    def test_missing_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1


class TestExperimentCommands:
    def test_sinr_cdf_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, SMALL)
        a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
        assert main(["sinr-cdf", "--config", cfg, "--seed", "7", "--out", str(a)]) == 0
        assert main(["sinr-cdf", "--config", cfg, "--seed", "7", "--out", str(b)]) == 0
        assert main(["sinr-cdf", "--config", cfg, "--seed", "7", "--threads", "3", "--out", str(c)]) == 0
        data = (a / "sinr_cdf.csv").read_bytes()
        assert data == (b / "sinr_cdf.csv").read_bytes() == (c / "sinr_cdf.csv").read_bytes()
        lines = data.decode().split("\n")
        assert lines[0] == "threshold_db,empirical_cdf,analytical_cdf"
        assert len(lines) == 202 and lines[-1] == ""
        assert b"\r" not in data
        manifest = json.loads((a / "sinr_cdf.manifest.json").read_text())
        assert manifest["seed"] == 7 and manifest["outputs"] == ["sinr_cdf.csv"]

    def test_seed_changes_output(self, tmp_path):
        cfg = write_config(tmp_path, SMALL)
        main(["outage-curve", "--config", cfg, "--seed", "1", "--out", str(tmp_path / "a")])
        main(["outage-curve", "--config", cfg, "--seed", "2", "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "outage_curve.csv").read_bytes() != (tmp_path / "b" / "outage_curve.csv").read_bytes()

    def test_curves(self, tmp_path):
        cfg = write_config(tmp_path, dict(SMALL, margins=[1, 3.1]))
        assert main(["outage-curve", "--config", cfg, "--out", str(tmp_path)]) == 0
        assert main(["baseline-curve", "--config", cfg, "--out", str(tmp_path)]) == 0
        rows = (tmp_path / "outage_curve.csv").read_text().splitlines()
        assert rows[0] == "epsilon,se_model,empirical_outage" and len(rows) == 5
        rows = (tmp_path / "baseline_curve.csv").read_text().splitlines()
        assert rows[0] == "margin,se,empirical_outage"
        assert [r.split(",")[0] for r in rows[1:]] == ["1", "3.1000000000000001"]

    def test_console_script(self, tmp_path):
        samples = tmp_path / "s.txt"
        samples.write_text("1\n2\n3\n")
        proc = subprocess.run([sys.executable, "-m", "mimo_outage.cli", "fit", str(samples)],
                              capture_output=True, text=True, check=False)
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["beta"] == 10.0
