"""Config parsing, manifest round-trip, exit codes, determinism."""

import json

import numpy as np
import pytest

from pulsefront import cli, config
from pulsefront.errors import ConfigError

MINIMAL = """
[medium]
period = 1.0
a0 = 1
b = 1

[kernel]
shape = quartic
delta0 = 0.5
q = 64

[grid]
n = 128
"""

FAST = """
[medium]
period = 1.0
a0 = 1
b = 1

[kernel]
shape = quartic
delta0 = 1.0
q = 64

[grid]
n = 64
"""


class TestParse:
    def test_minimal_valid(self):
        cfg = config.parse_config(MINIMAL)
        assert cfg.period == 1.0
        assert cfg.a0_coeffs == (1.0,)
        assert cfg.delta0 == 0.5
        assert cfg.n == 128

    def test_kernel_below_spacing(self):
        bad = MINIMAL.replace("delta0 = 0.5", "delta0 = 0.001")
        with pytest.raises(ConfigError, match="kernel support below grid spacing"):
            config.parse_config(bad)

    def test_unknown_key_named(self):
        bad = MINIMAL + "\n[experiment]\ndiffusivity = 1.0\n"
        with pytest.raises(ConfigError, match="diffusivity"):
            config.parse_config(bad)

    def test_all_violations_reported(self):
        bad = MINIMAL.replace("n = 128", "n = 4").replace("q = 64", "q = 8")
        with pytest.raises(ConfigError) as err:
            config.parse_config(bad)
        text = str(err.value)
        assert "n too small" in text and "q too small" in text

    def test_syntax_error_line_number(self):
        with pytest.raises(ConfigError, match="line"):
            config.parse_config("period = 1.0\n")  # key before any section

    def test_misaligned_quadrature(self):
        bad = MINIMAL.replace("delta0 = 0.5", "delta0 = 0.3")
        with pytest.raises(ConfigError, match="delta0/h|divide"):
            config.parse_config(bad)

    def test_nonpositive_b_rejected(self):
        bad = MINIMAL.replace("b = 1", "b = 0")
        with pytest.raises(ConfigError, match="strictly positive"):
            config.parse_config(bad)


class TestManifest:
    def test_round_trip_equality(self, tmp_path):
        cfg = config.parse_config(FAST)
        m = cli.dispatch("speed", cfg, tmp_path / "out")
        text = (tmp_path / "out" / "manifest.json").read_text()
        again = cli.RunManifest.from_json(text)
        assert again == m

    def test_failure_lands_in_manifest(self, tmp_path):
        cfg = config.parse_config(FAST.replace("\na0 = 1\n", "\na0 = -1\n"))
        m = cli.dispatch("speed", cfg, tmp_path / "out")
        assert m.exit_status == cli.EXIT_HYPOTHESIS
        saved = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert saved["status"] == "hypothesis-failure"
        assert "H2" in saved["error"]


class TestDispatch:
    def test_speed_matches_fine_scan(self, tmp_path):
        cfg = config.parse_config(FAST)
        m = cli.dispatch("speed", cfg, tmp_path / "out")
        assert m.exit_status == 0
        payload = json.loads((tmp_path / "out" / "speed.json").read_text())
        ker = cfg.kernel()
        mu = np.geomspace(1e-2, 20.0, 10_000)
        khat = np.exp(-np.outer(mu, ker.s)) @ ker.weights
        c_scan = float(np.min(khat / mu))
        assert abs(payload["c_star"] - c_scan) <= 1e-6 * c_scan

    def test_hypotheses_h3_warning_is_exit_zero(self, tmp_path):
        cfg = config.parse_config(FAST.replace("\na0 = 1\n", "\na0 = 1, 0.75\n"))
        m = cli.dispatch("hypotheses", cfg, tmp_path / "out")
        assert m.exit_status == 0
        assert m.checks["hypotheses"]["H3_sufficient"] is False

    def test_hypotheses_h2_failure_exit_two(self, tmp_path):
        cfg = config.parse_config(FAST.replace("\na0 = 1\n", "\na0 = -1\n"))
        m = cli.dispatch("hypotheses", cfg, tmp_path / "out")
        assert m.exit_status == cli.EXIT_HYPOTHESIS

    def test_subcritical_wave_exit_three(self, tmp_path):
        cfg = config.parse_config(FAST + "\n[experiment]\nc_multiplier = 0.9\n")
        m = cli.dispatch("wave", cfg, tmp_path / "out")
        assert m.exit_status == cli.EXIT_NONCONVERGENCE
        assert "no subcritical decay rate" in m.error

    def test_eig_csv_schema(self, tmp_path):
        cfg = config.parse_config(FAST + "\n[experiment]\nmu_count = 5\n")
        m = cli.dispatch("eig", cfg, tmp_path / "out")
        assert m.exit_status == 0
        lines = (tmp_path / "out" / "eig.csv").read_text().splitlines()
        assert lines[0] == "mu,lambda0,residual,iters,min_phi,max_phi"
        assert len(lines) == 6

    def test_determinism_byte_identical(self, tmp_path):
        cfg = config.parse_config(FAST + "\n[experiment]\nmu_count = 5\n")
        m1 = cli.dispatch("eig", cfg, tmp_path / "a")
        m2 = cli.dispatch("eig", cfg, tmp_path / "b")
        assert ((tmp_path / "a" / "eig.csv").read_bytes()
                == (tmp_path / "b" / "eig.csv").read_bytes())
        d1 = json.loads((tmp_path / "a" / "manifest.json").read_text())
        d2 = json.loads((tmp_path / "b" / "manifest.json").read_text())
        d1.pop("wall_clock_s"), d2.pop("wall_clock_s")
        assert d1 == d2

    def test_unknown_command(self, tmp_path):
        cfg = config.parse_config(FAST)
        with pytest.raises(ValueError, match="unknown command"):
            cli.dispatch("paint", cfg, tmp_path / "out")


class TestEndToEnd:
    """Each remaining command once, at fast (relaxed-tolerance) settings."""

    def test_wave_command(self, tmp_path):
        text = FAST + ("\n[solver]\ntol_wave = 1e-4\nt_cap = 90\n"
                       "[experiment]\nm_phases = 8\n")
        cfg = config.parse_config(text)
        m = cli.dispatch("wave", cfg, tmp_path / "out")
        assert m.exit_status == 0, m.error
        for key in ("c", "mu", "mu1", "lambda_mu", "lambda_mu1", "d0", "d1",
                    "d2", "b", "M", "L", "mu_hat", "M0", "sigma0", "eta0", "l"):
            assert key in m.constants
        assert m.checks["wave"]["gap"] <= 1e-4
        assert m.checks["squeeze"]["ok"]
        lines = (tmp_path / "out" / "profiles.csv").read_text().splitlines()
        assert lines[0] == "eta,phase_k,psi"
        phases = {int(float(l.split(",")[1])) for l in lines[1:]}
        assert phases == set(range(8))

    def test_stability_command(self, tmp_path):
        text = FAST + ("\n[solver]\ntol_wave = 1e-4\nt_cap = 90\n"
                       "[experiment]\nt_end = 5\n")
        cfg = config.parse_config(text)
        m = cli.dispatch("stability", cfg, tmp_path / "out")
        assert m.exit_status == 0, m.error
        lines = (tmp_path / "out" / "series.csv").read_text().splitlines()
        assert lines[0] == "t,sup_ratio_error"
        assert m.checks["stability"]["hypothesis_met"]

    def test_uniqueness_command(self, tmp_path):
        text = FAST + "\n[solver]\ntol_wave = 1e-4\nt_cap = 90\n"
        cfg = config.parse_config(text)
        m = cli.dispatch("uniqueness", cfg, tmp_path / "out")
        assert m.exit_status == 0, m.error
        assert m.checks["uniqueness"]["distance"] <= 2e-4

    def test_spread_command(self, tmp_path):
        text = FAST + "\n[experiment]\nt_end = 30\ndomain_length = 60\nlevel = 0.5\n"
        cfg = config.parse_config(text)
        m = cli.dispatch("spread", cfg, tmp_path / "out")
        assert m.exit_status == 0, m.error
        lines = (tmp_path / "out" / "spread.csv").read_text().splitlines()
        assert lines[0] == "t,x_level,u_max,u_min,rhs_sup"
        assert 0.3 <= m.constants["fitted_speed"] <= 0.8


class TestMain:
    def test_usage_error_on_bad_config(self, tmp_path, capsys):
        bad = tmp_path / "bad.ini"
        bad.write_text(MINIMAL + "\n[medium]\nwhat = 1\n")
        code = cli.main(["speed", "--config", str(bad), "--out-dir",
                         str(tmp_path / "out")])
        assert code == cli.EXIT_USAGE

    def test_missing_config_file(self, tmp_path):
        code = cli.main(["speed", "--config", str(tmp_path / "nope.ini"),
                         "--out-dir", str(tmp_path / "out")])
        assert code == cli.EXIT_USAGE

    def test_speed_end_to_end(self, tmp_path):
        p = tmp_path / "run.ini"
        p.write_text(FAST)
        code = cli.main(["speed", "--config", str(p), "--out-dir",
                         str(tmp_path / "out"), "--threads", "2"])
        assert code == 0
        assert (tmp_path / "out" / "speed.json").exists()
