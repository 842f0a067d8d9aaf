import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from ncricci.cli import EXIT_INPUT, EXIT_OK, EXIT_TOLERANCE, _threads, main
from ncricci.config import ConfigError
from ncricci.symbols import load_golden

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestExitCodes:
    def test_success_prints_json(self, capsys):
        code, out, _ = run(["verify-identity", "--grid-n", "9"], capsys)
        assert code == EXIT_OK
        rep = json.loads(out)
        assert rep["status"] == "pass" and rep["results"]["grid_n"] == 9
        assert rep["tolerances"]["identity"] == 1e-8 and len(rep["config_hash"]) == 64

    def test_tolerance_violation(self, capsys):
        code, out, _ = run(["verify-identity", "--grid-n", "9", "--tol", "identity=1e-30"], capsys)
        assert code == EXIT_TOLERANCE
        assert json.loads(out)["status"] == "fail"

    @pytest.mark.parametrize("argv", [
        ["ricci", "--tol", "bogus=1"],
        ["ricci", "--tol", "identity"],
        ["ricci", "--config", "/nonexistent/config.json"],
        ["ricci", "--threads", "0"],
    ])
    def test_input_errors(self, argv, capsys):
        code, _, err = run(argv, capsys)
        assert code == EXIT_INPUT and "input error" in err

    def test_unknown_config_key(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"thetta": 0.1}))
        code, _, err = run(["scalar", "--config", str(p)], capsys)
        assert code == EXIT_INPUT and "thetta" in err

    @pytest.mark.parametrize("argv", [[], ["nope"], ["ricci", "--grid-n", "x"]])
    def test_usage_errors_exit_with_input_code(self, argv, capsys):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == EXIT_INPUT


class TestReports:
    def test_deterministic_and_hash_tracks_config(self, tmp_path, capsys):
        a = run(["verify-identity", "--grid-n", "7"], capsys)[1]
        b = run(["verify-identity", "--grid-n", "7"], capsys)[1]
        c = run(["verify-identity", "--grid-n", "9"], capsys)[1]
        assert a == b
        assert json.loads(a)["config_hash"] != json.loads(c)["config_hash"]

    def test_out_directory(self, tmp_path, capsys):
        code, out, _ = run(["verify-identity", "--grid-n", "7", "--out", str(tmp_path)], capsys)
        assert code == EXIT_OK
        assert out.startswith("PASS identity_residual")
        assert json.loads((tmp_path / "verify-identity.json").read_text())["command"] == "verify-identity"

    def test_flat_ricci_is_zero(self, capsys):
        code, out, _ = run(["ricci", "--config", str(CONFIGS / "flat.json")], capsys)
        rep = json.loads(out)
        assert code == EXIT_OK
        assert rep["results"]["closed"]["diagonal"] == [] and rep["results"]["max_difference"] == 0.0

    def test_flat_spectral_check_writes_tables(self, tmp_path, capsys):
        code, _, _ = run(["spectral-check", "--config", str(CONFIGS / "flat.json"), "--out", str(tmp_path)],
                         capsys)
        assert code == EXIT_OK
        rows = list(csv.reader(open(tmp_path / "spectral_random.csv")))
        assert rows[0] == ["t", "trace", "trace_imag"] and len(rows) == 17
        rep = json.loads((tmp_path / "spectral-check.json").read_text())
        assert set(rep["results"]["smearings"]) == {"identity", "random"}

    def test_b2_report_matches_golden(self, capsys):
        code, out, _ = run(["b2-report"], capsys)
        rep = json.loads(out)["results"]
        assert code == EXIT_OK
        assert rep["n_terms"] == 76 and rep["diff"] == {"only_engine": [], "only_golden": []}
        assert rep["angular_matches_golden"]

    def test_b2_report_flags_perturbed_golden(self, tmp_path, capsys):
        golden = load_golden("b2_sigma_expansion.json")
        golden[0] = dict(golden[0], coef="3")
        gpath = tmp_path / "golden.json"
        gpath.write_text(json.dumps(golden))
        cpath = tmp_path / "c.json"
        cpath.write_text(json.dumps({"golden_expansion": str(gpath)}))
        code, out, _ = run(["b2-report", "--config", str(cpath)], capsys)
        diff = json.loads(out)["results"]["diff"]
        assert code == EXIT_TOLERANCE
        assert len(diff["only_engine"]) == 1 and len(diff["only_golden"]) == 1
        assert diff["only_golden"][0]["coef"] == "3"

    def test_b2_report_without_dilaton_has_no_surviving_terms(self, capsys):
        code, out, _ = run(["b2-report", "--config", str(CONFIGS / "flat.json")], capsys)
        assert code == EXIT_OK and json.loads(out)["results"]["expansion_at_dilaton"] == []


class TestThreads:
    def test_environment_fallback(self, monkeypatch):
        monkeypatch.setenv("NCG_RICCI_THREADS", "3")
        assert _threads(None) == 3
        assert _threads(2) == 2
        monkeypatch.setenv("NCG_RICCI_THREADS", "many")
        with pytest.raises(ConfigError):
            _threads(None)
        monkeypatch.delenv("NCG_RICCI_THREADS")
        assert _threads(None) == 1

    def test_thread_count_does_not_change_report(self, capsys):
        cfg = str(CONFIGS / "commutative.json")
        one = run(["scalar", "--config", cfg, "--threads", "1"], capsys)[1]
        four = run(["scalar", "--config", cfg, "--threads", "4"], capsys)[1]
        assert one == four


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "ncricci.cli", "verify-identity", "--grid-n", "5"],
                         capture_output=True, text=True, env=dict(os.environ))
    assert out.returncode == EXIT_OK and json.loads(out.stdout)["command"] == "verify-identity"
