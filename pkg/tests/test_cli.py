import json
import os

import pytest

from pedtrial.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from pedtrial.store import read_session


def dir_bytes(root):
    out = {}
    for base, _dirs, files in os.walk(root):
        for name in files:
            path = os.path.join(base, name)
            with open(path, "rb") as fh:
                out[os.path.relpath(path, root)] = fh.read()
    return out


class TestSimulate:
    def test_deterministic_session_dirs(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            code = main([
                "simulate", "--profile", "nv", "--sessions", "1",
                "--seed", "7", "--out", str(out),
            ])
            assert code == EXIT_OK
        assert dir_bytes(a) == dir_bytes(b)  # byte-identical reruns

    def test_written_session_readable(self, tmp_path):
        out = tmp_path / "s"
        main(["simulate", "--profile", "hh-right", "--sessions", "1",
              "--seed", "5", "--out", str(out)])
        [session_dir] = [p for p in out.iterdir() if p.is_dir()]
        log = read_session(str(session_dir))
        assert len(log.trials) == 32
        assert log.profile == "hh-right"

    def test_pws_scenario(self, tmp_path):
        out = tmp_path / "p"
        code = main(["simulate", "--scenario", "pws", "--sessions", "1",
                     "--seed", "2", "--out", str(out)])
        assert code == EXIT_OK
        [session_dir] = [p for p in out.iterdir() if p.is_dir()]
        assert len(read_session(str(session_dir)).trials) == 12


class TestPws:
    def test_estimate_over_sessions(self, tmp_path, capsys):
        out = tmp_path / "p"
        main(["simulate", "--scenario", "pws", "--sessions", "1",
              "--seed", "2", "--out", str(out)])
        [session_dir] = [p for p in out.iterdir() if p.is_dir()]
        code = main(["pws", str(session_dir)])
        assert code == EXIT_OK
        text = capsys.readouterr().out
        assert "PWS estimate" in text

    def test_missing_dir_is_data_error(self, capsys):
        assert main(["pws", "/nonexistent/session"]) == EXIT_DATA


class TestAnalyze:
    def test_report_artifacts(self, tmp_path, capsys):
        sessions = tmp_path / "s"
        main(["simulate", "--profile", "nv", "--sessions", "1", "--seed", "1",
              "--out", str(sessions)])
        main(["simulate", "--profile", "hh-left", "--sessions", "1", "--seed", "2",
              "--out", str(sessions)])
        dirs = [str(p) for p in sessions.iterdir() if p.is_dir()]
        out = tmp_path / "analysis"
        code = main(["analyze", *dirs, "--out", str(out)])
        assert code == EXIT_OK
        assert (out / "report.json").exists()
        assert (out / "report.txt").exists()
        assert (out / "rates.csv").exists()
        report = json.loads((out / "report.json").read_text())
        assert report["n_trials"] == 64
        for d in dirs:
            assert os.path.exists(os.path.join(d, "outcomes.csv"))


class TestValidate:
    GOOD = (
        "schema = pedtrial.scenario.v1\n"
        "[subject]\npws = 1.0\n"
        "[session]\nseed = 1\nprofile = nv\n"
    )

    def test_valid_file(self, tmp_path, capsys):
        p = tmp_path / "ok.ped"
        p.write_text(self.GOOD)
        assert main(["validate", str(p)]) == EXIT_OK
        assert "OK" in capsys.readouterr().out

    def test_violation_named_with_line(self, tmp_path, capsys):
        p = tmp_path / "bad.ped"
        p.write_text(
            self.GOOD + "[[trial]]\nkind = approaching\nbeta_deg = 60\n"
        )
        code = main(["validate", str(p)])
        assert code == EXIT_DATA
        err = capsys.readouterr().err
        assert "approaching" in err
        assert ":line 9:" in err or "line 9" in err

    def test_missing_file(self, capsys):
        assert main(["validate", "/nonexistent.ped"]) == EXIT_DATA


class TestUsage:
    def test_unknown_flag_exits_1(self):
        assert main(["simulate", "--bogus"]) == EXIT_USAGE

    def test_no_command_exits_1(self):
        assert main([]) == EXIT_USAGE


class TestScenarioFileConfig:
    SCENARIO = (
        "schema = pedtrial.scenario.v1\n"
        "[subject]\npws = 1.1\nfield_loss = right_hemianopia\n"
        "[session]\nseed = 40\nprofile = hh-right\n"
        "[policy]\nscan_bias = -5.0\n"
        "[[trial]]\nkind = overtaken\nbeta_deg = 20\n"
        "[[trial]]\nkind = null\n"
    )

    def test_simulate_from_scenario_file(self, tmp_path):
        p = tmp_path / "s.ped"
        p.write_text(self.SCENARIO)
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(p), "--out", str(out)]) == EXIT_OK
        [session_dir] = [d for d in out.iterdir() if d.is_dir()]
        log = read_session(str(session_dir))
        assert log.subject.pws == 1.1
        assert log.seed == 40
        assert len(log.trials) == 2
        assert log.trials[0].trial.course.kind.value == "overtaken"
        assert log.trials[1].trial.course is None

    def test_invalid_scenario_file_is_data_error(self, tmp_path, capsys):
        p = tmp_path / "bad.ped"
        p.write_text(self.SCENARIO.replace("pws = 1.1", "pws = 0"))
        assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_DATA
