"""Config grammar, CSV contract, subcommand exit codes, determinism."""

import os

import numpy as np
import pytest

from phiface import config as cfg
from phiface.cli import run_command, write_csv
from phiface.errors import ConfigError

BASE_CONFIG = """
[domain]
a = -1.0
b = 1.0
l0 = -0.2

[material.minus.q11]
piece = { from = -1.0, to = 1.0, coeffs = [1.0, 0.0, 0.4] }

[material.minus.q22]
piece = { from = -1.0, to = 1.0, coeffs = [2.0, 0.0, 0.8] }

[material.plus.q11]
piece = { from = -1.0, to = 1.0, coeffs = [1.0, 0.0, 0.7, 0.0, 0.12] }

[material.plus.q22]
piece = { from = -1.0, to = 1.0, coeffs = [2.0, 0.0, 1.4, 0.0, 0.24] }

[boundary]
W_B = [0.70710678118654752, 0.0, 0.70710678118654752, 0.0, 0.0, 0.70710678118654752, 0.0, 0.70710678118654752]
r = 0.0

[run]
n_minus = 16
n_plus = 16
dt = 0.005
tau = 0.1
seed = 11
positions = 3
kato_sequences = 1
kato_k = 2
nsamples = 256
nquad = 1024
"""

CEX_CONFIG = """
[counterexample]
epsilon = 0.1
xi1 = -0.7
xi2 = -0.55
klist = [1, 2, 4, 8]

[run]
seed = 3
nquad = 1024
"""


@pytest.fixture
def base_config(tmp_path):
    path = tmp_path / "base.cfg"
    path.write_text(BASE_CONFIG)
    return str(path)


@pytest.fixture
def cex_config(tmp_path):
    path = tmp_path / "cex.cfg"
    path.write_text(CEX_CONFIG)
    return str(path)


class TestParseConfig:
    def test_minimal_with_defaults(self, base_config):
        raw = cfg.parse_config(base_config)
        run = cfg.build_run(raw)
        assert run["scheme"] == "implicit-midpoint"
        assert run["cadence"] == 1
        dom = cfg.build_domain(raw)
        assert dom.l0 == pytest.approx(-0.2)
        mat = cfg.build_material(raw, dom)
        assert mat.m > 0

    def test_domain_invariant_enforced(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[domain]\na = 1.0\nb = 0.5\n")
        raw = cfg.parse_config(str(path))
        with pytest.raises(ConfigError):
            cfg.build_domain(raw)

    def test_wb_arity_error(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[boundary]\nW_B = [1, 0, 0, 0, 0, 1, 0]\n")
        raw = cfg.parse_config(str(path))
        with pytest.raises(ConfigError, match="8 entries"):
            cfg.build_boundary(raw)

    def test_unknown_key_reports_line(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[domain]\na = -1.0\nb = 1.0\nbogus = 3\n")
        with pytest.raises(ConfigError, match="line 4"):
            cfg.parse_config(str(path))

    def test_malformed_number_reports_line(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[domain]\na = -1.0\nb = 1.0e+q\n")
        with pytest.raises(ConfigError, match="line 3"):
            cfg.parse_config(str(path))

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[domain]\na = -1.0\na = -2.0\nb = 1.0\n")
        with pytest.raises(ConfigError, match="duplicate"):
            cfg.parse_config(str(path))

    def test_overrides(self, base_config):
        raw = cfg.parse_config(base_config)
        cfg.apply_overrides(raw, ["run.seed=99", "domain.l0=0.1"])
        assert cfg.build_run(raw)["seed"] == 99
        assert cfg.build_domain(raw).l0 == pytest.approx(0.1)

    def test_multiline_list_value(self, tmp_path):
        path = tmp_path / "ml.cfg"
        path.write_text(
            "[boundary]\n"
            "W_B = [1.0, 0.0, 0.0, 0.0,   # first row\n"
            "       0.0, 1.0, 0.0, 0.0]\n"
            "r = 0.0\n"
        )
        raw = cfg.parse_config(str(path))
        bc = cfg.build_boundary(raw)
        assert np.allclose(bc.W_B, np.hstack([np.eye(2), np.zeros((2, 2))]))


class TestWriteCsv:
    def test_empty_series_header_only(self, tmp_path):
        path = str(tmp_path / "empty.csv")
        write_csv(path, ("a", "b"), [])
        assert open(path, "rb").read() == b"a,b\n"

    def test_single_record(self, tmp_path):
        path = str(tmp_path / "one.csv")
        write_csv(path, ("a", "b"), [(1, 0.5)])
        lines = open(path).read().splitlines()
        assert lines == ["a,b", "1,0.5"]

    def test_seventeen_significant_digits(self, tmp_path):
        path = str(tmp_path / "digits.csv")
        write_csv(path, ("v",), [(1.0 / 3.0,)])
        text = open(path).read().splitlines()[1]
        assert float(text) == 1.0 / 3.0
        assert len(text.split(".")[1]) >= 16


class TestSubcommands:
    def test_check_passes(self, base_config, tmp_path):
        out = str(tmp_path / "out")
        assert run_command(["check", "--config", base_config, "--out", out]) == 0
        kv = open(os.path.join(out, "report.kv")).read()
        assert "a1_pass = true" in kv
        assert "a2_pass = true" in kv

    def test_check_fails_on_bad_boundary(self, base_config, tmp_path):
        out = str(tmp_path / "out")
        code = run_command([
            "check", "--config", base_config, "--out", out,
            "--set", "boundary.r=0.5",
        ])
        assert code == 1

    def test_omega_zero_for_equal_materials(self, tmp_path):
        text = BASE_CONFIG.replace(
            "[material.plus.q11]\npiece = { from = -1.0, to = 1.0, coeffs = [1.0, 0.0, 0.7, 0.0, 0.12] }",
            "[material.plus.q11]\npiece = { from = -1.0, to = 1.0, coeffs = [1.0, 0.0, 0.4] }",
        ).replace(
            "[material.plus.q22]\npiece = { from = -1.0, to = 1.0, coeffs = [2.0, 0.0, 1.4, 0.0, 0.24] }",
            "[material.plus.q22]\npiece = { from = -1.0, to = 1.0, coeffs = [2.0, 0.0, 0.8] }",
        )
        path = tmp_path / "equal.cfg"
        path.write_text(text)
        out = str(tmp_path / "out")
        assert run_command(["omega", "--config", str(path), "--out", out]) == 0
        kv = open(os.path.join(out, "report.kv")).read()
        assert "omega = 0\n" in kv

    def test_omega_refused_exit_code(self, base_config, tmp_path):
        out = str(tmp_path / "out")
        code = run_command([
            "omega", "--config", base_config, "--out", out,
            # constant unequal scaling violates the ratio-at-zero condition
            "--set", "material.plus.q11.piece={ from = -1.0, to = 1.0, coeffs = [2.0] }",
        ])
        assert code == 2  # piece override is not a list; config error
        code = run_command(["omega", "--config", base_config, "--out", out,
                            "--set", "domain.l0=bogus"])
        assert code == 2

    def test_resolvent_passes(self, base_config, tmp_path):
        out = str(tmp_path / "out")
        assert run_command(["resolvent", "--config", base_config, "--out", out]) == 0
        kv = open(os.path.join(out, "report.kv")).read()
        assert "semigroup_pass = true" in kv

    def test_missing_config_usage_error(self, tmp_path):
        assert run_command(["check", "--config", str(tmp_path / "nope.cfg")]) == 2

    def test_invalid_scheme_usage_error(self, base_config, tmp_path):
        out = str(tmp_path / "out")
        code = run_command(["simulate", "--config", base_config, "--out", out,
                            "--set", "run.scheme=leapfrog"])
        assert code == 2

    def test_simulate_writes_timeseries(self, base_config, tmp_path):
        out = str(tmp_path / "out")
        assert run_command(["simulate", "--config", base_config, "--out", out]) == 0
        lines = open(os.path.join(out, "timeseries.csv")).read().splitlines()
        assert lines[0] == "t,H,boundary_power,interface_power,balance_residual,l,e_l,regrid_dH"
        assert len(lines) == 22  # 20 steps + initial record + header

    def test_audit_reports_order(self, base_config, tmp_path):
        out = str(tmp_path / "out")
        assert run_command(["audit", "--config", base_config, "--out", out,
                            "--set", "run.tau=0.05"]) == 0
        kv = open(os.path.join(out, "report.kv")).read()
        order = float([l for l in kv.splitlines() if "observed_order" in l][0].split("=")[1])
        assert order >= 1.5

    def test_counterexample_reproduces(self, cex_config, tmp_path):
        out = str(tmp_path / "out")
        assert run_command(["counterexample", "--config", cex_config, "--out", out]) == 0
        kv = open(os.path.join(out, "report.kv")).read()
        assert "a1_pass = false" in kv
        assert "certificate_refused = true" in kv
        assert "counterexample_reproduced = true" in kv
        rows = open(os.path.join(out, "sweep.csv")).read().splitlines()
        assert rows[0] == "k,form_value,x_norm,deriv_term,xprime_term"
        vals = [float(r.split(",")[1]) for r in rows[1:]]
        assert vals == sorted(vals)


class TestShippedConfigs:
    CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")

    def test_demo_config_checks_out(self, tmp_path):
        out = str(tmp_path / "out")
        path = os.path.join(self.CONFIG_DIR, "demo.cfg")
        assert run_command(["check", "--config", path, "--out", out]) == 0

    def test_fixed_config_audits(self, tmp_path):
        out = str(tmp_path / "out")
        path = os.path.join(self.CONFIG_DIR, "fixed.cfg")
        assert run_command(["audit", "--config", path, "--out", out,
                            "--set", "run.tau=0.05"]) == 0

    def test_counterexample_config_sweeps(self, tmp_path):
        out = str(tmp_path / "out")
        path = os.path.join(self.CONFIG_DIR, "counterexample.cfg")
        assert run_command(["sweep", "--config", path, "--out", out,
                            "--set", "run.nquad=1024"]) == 0


class TestDeterminism:
    def test_simulate_reruns_byte_identical(self, base_config, tmp_path):
        out1, out2 = str(tmp_path / "o1"), str(tmp_path / "o2")
        assert run_command(["simulate", "--config", base_config, "--out", out1]) == 0
        assert run_command(["simulate", "--config", base_config, "--out", out2]) == 0
        b1 = open(os.path.join(out1, "timeseries.csv"), "rb").read()
        b2 = open(os.path.join(out2, "timeseries.csv"), "rb").read()
        assert b1 == b2

    def test_sweep_reruns_byte_identical(self, cex_config, tmp_path):
        out1, out2 = str(tmp_path / "s1"), str(tmp_path / "s2")
        assert run_command(["sweep", "--config", cex_config, "--out", out1]) == 0
        assert run_command(["sweep", "--config", cex_config, "--out", out2]) == 0
        b1 = open(os.path.join(out1, "sweep.csv"), "rb").read()
        b2 = open(os.path.join(out2, "sweep.csv"), "rb").read()
        assert b1 == b2
