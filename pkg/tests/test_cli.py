"""Command-line interface: exit codes, output schema, reproducibility."""

import json
import subprocess
import sys

import pytest

from crlab import cli


def _run(tmp_path, *argv):
    code = cli.run_cli(list(argv) + ["--out", str(tmp_path)])
    docs = sorted(tmp_path.glob("*.json"))
    return code, (json.loads(docs[-1].read_text()) if docs else None)


class TestExitCodes:
    def test_unknown_subcommand(self, tmp_path):
        assert cli.run_cli(["bogus"]) == cli.EXIT_USAGE

    def test_bad_resolution(self, tmp_path):
        assert cli.run_cli(["invariants", "--res", "12", "--out", str(tmp_path)]) == cli.EXIT_USAGE

    def test_unknown_geometry(self, tmp_path):
        assert cli.run_cli(["invariants", "--geometry", "klein", "--out", str(tmp_path)]) == cli.EXIT_USAGE

    def test_bad_tolerance(self, tmp_path):
        assert cli.run_cli(["invariants", "--tol", "structure_residual", "--out", str(tmp_path)]) == cli.EXIT_USAGE

    def test_tolerance_failure_is_exit_2(self, tmp_path):
        code, doc = _run(tmp_path, "embed", "--gamma", "ellipsoid:a=2", "--samples", "20",
                         "--tol", "difference=1e-30")
        assert code == cli.EXIT_TOLERANCE
        assert doc["residual"]["max"] > 1e-30


class TestOutputs:
    def test_invariants_values(self, tmp_path):
        code, doc = _run(tmp_path, "invariants", "--geometry", "t3-roto:n=1", "--res", "16")
        assert code == cli.EXIT_OK
        assert doc["schema"] == cli.SCHEMA
        assert doc["config_hash"] == cli.build_config(
            ["invariants", "--geometry", "t3-roto:n=1", "--res", "16"]).digest()
        assert doc["W"]["max"] == pytest.approx(0.5, abs=1e-8)
        assert doc["A"]["max"] == pytest.approx(0.5, abs=1e-8)
        assert doc["Q"]["max"] == pytest.approx(0.375, abs=1e-8)

    def test_config_file_and_flag_override(self, tmp_path):
        conf = tmp_path / "c.json"
        conf.write_text(json.dumps({"geometry": "t3-roto:n=1", "res": 64}))
        cfg = cli.build_config(["invariants", "--config", str(conf), "--res", "16"])
        assert cfg.geometry == "t3-roto:n=1" and cfg.res == 16

    def test_unknown_config_key(self, tmp_path):
        conf = tmp_path / "c.json"
        conf.write_text(json.dumps({"resolution": 16}))
        assert cli.run_cli(["invariants", "--config", str(conf)]) == cli.EXIT_USAGE

    def test_perturbed_alias(self):
        cfg = cli.build_config(["embed", "--gamma", "perturbed:eps=0.01,mode=2"])
        assert cfg.geometry == "sphere-perturbed:eps=0.01,mode=2"

    def test_embed_dbar_identity(self, tmp_path):
        code, doc = _run(tmp_path, "embed", "--gamma", "ellipsoid:a=2", "--samples", "20")
        assert code == cli.EXIT_OK
        assert doc["residual"]["max"] < 1e-3

    def test_flow_csv(self, tmp_path):
        code = cli.run_cli(["flow", "--geometry", "t3-roto:n=1", "--res", "8", "--dt", "0.001",
                            "--T", "0.003", "--out", str(tmp_path)])
        assert code == cli.EXIT_OK
        csv_path = next(tmp_path.glob("flow-*.csv"))
        lines = csv_path.read_text().splitlines()
        assert lines[0].startswith("# schema=") and "config_hash=" in lines[0]
        assert len(lines) == 2 + 4

    def test_reproducible(self, tmp_path):
        argv = ["invariants", "--geometry", "t3-roto:n=2", "--res", "16"]
        a, b = tmp_path / "a", tmp_path / "b"
        cli.run_cli(argv + ["--out", str(a)])
        cli.run_cli(argv + ["--out", str(b)])
        fa, fb = next(a.glob("*.json")), next(b.glob("*.json"))
        da, db = json.loads(fa.read_text()), json.loads(fb.read_text())
        da["config"].pop("out"), db["config"].pop("out")
        assert fa.name == fb.name and da == db

    def test_module_entry_point(self, tmp_path):
        r = subprocess.run([sys.executable, "-m", "crlab", "invariants", "--res", "8",
                            "--out", str(tmp_path)], capture_output=True, text=True, timeout=120)
        assert r.returncode == 0
        assert json.loads(r.stdout.strip().splitlines()[-1])["exit"] == 0
