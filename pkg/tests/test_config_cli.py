import json
import subprocess
import sys

import pytest

from orbitlab.config import ConfigError, emit_config, parse_config, validate_config
from orbitlab.runner import run

MINIMAL = """
system = doubling
experiment = kac
zeta = 0.37
delta = 0.005
m = 10000
seed = 1
"""


class TestParsing:
    def test_minimal_valid(self):
        cfg = parse_config(MINIMAL)
        assert cfg.experiment == "kac"
        assert cfg.zeta == (0.37,)
        assert cfg.m == 10000

    def test_negative_delta_named(self):
        with pytest.raises(ConfigError, match="delta must be positive"):
            parse_config(MINIMAL.replace("delta = 0.005", "delta = -1"))

    def test_obs_max_is_g3_only(self):
        text = MINIMAL + "observable = g2\nalpha = 2.0\nobs_max = 1.0\n"
        with pytest.raises(ConfigError, match="g3-only"):
            parse_config(text)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(MINIMAL + "frobnicate = 1\n")

    def test_all_violations_reported(self):
        bad = """
        system = nosuch
        experiment = kac
        seed = 1
        delta = -2
        m = 0
        """
        with pytest.raises(ConfigError) as err:
            parse_config(bad)
        text = str(err.value)
        assert "system" in text and "delta" in text and "m must be positive" in text
        assert len(err.value.problems) >= 3

    def test_missing_required_for_experiment(self):
        with pytest.raises(ConfigError, match="kac requires delta"):
            parse_config("system = doubling\nexperiment = kac\nseed = 1\nzeta = 0.1\nm = 100\n")

    def test_grid_syntax(self):
        cfg = parse_config(
            "system = doubling\nexperiment = hts\nseed = 1\nzeta = 0.1\n"
            "delta = 0.01\nm = 100\nt_grid = 0:5:6\n"
        )
        assert cfg.t_grid == (0.0, 1.0, 2.0, 3.0, 4.0, 5.0)

    def test_round_trip(self):
        cfg = parse_config(MINIMAL + "tol = 0.05\ny_grid = -2:3:21\n")
        assert parse_config(emit_config(cfg)) == cfg

    def test_torus_zeta_arity(self):
        with pytest.raises(ConfigError, match="component"):
            parse_config(MINIMAL.replace("system = doubling", "system = torus-doubling"))

    def test_validate_returns_empty_for_valid(self):
        assert validate_config(parse_config(MINIMAL)) == []


class TestRunnerDeterminism:
    def test_same_seed_byte_identical(self, tmp_path):
        cfg = parse_config(MINIMAL.replace("m = 10000", "m = 500") + "tol = 0.2\n")
        a, b = tmp_path / "a", tmp_path / "b"
        run(cfg, out_dir=a)
        run(cfg, out_dir=b)
        for name in ("returns.csv", "metrics.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_different_seed_differs(self, tmp_path):
        base = MINIMAL.replace("m = 10000", "m = 500")
        a, b = tmp_path / "a", tmp_path / "b"
        run(parse_config(base), out_dir=a)
        run(parse_config(base.replace("seed = 1", "seed = 2")), out_dir=b)
        assert (a / "returns.csv").read_bytes() != (b / "returns.csv").read_bytes()

    def test_report_lists_all_files(self, tmp_path):
        cfg = parse_config(MINIMAL.replace("m = 10000", "m = 500"))
        rep = run(cfg, out_dir=tmp_path)
        listed = set(rep.files)
        on_disk = {p.name for p in tmp_path.iterdir()} - {"report.json"}
        assert on_disk == listed

    def test_config_echo_round_trips(self, tmp_path):
        cfg = parse_config(MINIMAL.replace("m = 10000", "m = 500"))
        rep = run(cfg, out_dir=tmp_path)
        assert parse_config(rep.config_text) == cfg
        payload = json.loads((tmp_path / "metrics.json").read_text())
        assert parse_config(payload["config"]) == cfg

    def test_csv_format_conventions(self, tmp_path):
        cfg = parse_config(MINIMAL.replace("m = 10000", "m = 500"))
        run(cfg, out_dir=tmp_path)
        body = (tmp_path / "returns.csv").read_bytes()
        assert b"\r" not in body
        header = body.split(b"\n", 1)[0].decode()
        assert header == header.lower()
        assert "," in header


class TestCli:
    def _cli(self, *args, env=None):
        import os

        full_env = dict(os.environ)
        if env:
            full_env.update(env)
        return subprocess.run(
            [sys.executable, "-m", "orbitlab.cli", *args],
            capture_output=True,
            text=True,
            env=full_env,
        )

    def test_validate_ok(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text(MINIMAL)
        res = self._cli("validate", str(p))
        assert res.returncode == 0
        assert "ok" in res.stdout

    def test_validate_reports_problems(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text(MINIMAL + "nonsense = 1\n")
        res = self._cli("validate", str(p))
        assert res.returncode == 2
        assert "unknown key" in res.stderr

    def test_run_pass_exit_zero(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text(MINIMAL.replace("m = 10000", "m = 2000") + "tol = 0.08\n")
        res = self._cli("run", str(p), "--out", str(tmp_path / "out"))
        assert res.returncode == 0, res.stderr
        assert (tmp_path / "out" / "metrics.json").exists()

    def test_override_and_seed_flags(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text(MINIMAL.replace("m = 10000", "m = 2000"))
        out = tmp_path / "out"
        res = self._cli("run", str(p), "--out", str(out), "--seed", "7", "--override", "m = 500")
        assert res.returncode == 0, res.stderr
        payload = json.loads((out / "metrics.json").read_text())
        assert "seed = 7" in payload["config"]
        assert "m = 500" in payload["config"]

    def test_env_var_output_dir(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text(MINIMAL.replace("m = 10000", "m = 500"))
        out = tmp_path / "envout"
        res = self._cli("run", str(p), env={"ORBITLAB_OUT": str(out)})
        assert res.returncode == 0
        assert (out / "metrics.json").exists()

    def test_failing_tolerance_exit_one(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text(MINIMAL.replace("m = 10000", "m = 200") + "tol = 0.0001\n")
        res = self._cli("run", str(p), "--out", str(tmp_path / "out"))
        assert res.returncode == 1
        assert "FAIL" in res.stdout
