import json
import subprocess
import sys

import pytest

from bisimlearn.cli import (
    EXIT_FAILS,
    EXIT_INCONCLUSIVE,
    EXIT_NO_SOLVER,
    EXIT_OK,
    EXIT_ORACLE,
    EXIT_USAGE,
    main,
)

from conftest import SYSTEMS, needs_solver

COUNTDOWN = """
name countdown
vars x
init x >= 0
transitions
  x > 0 -> x := x - 1
  else -> skip
labels
  zero: x <= 0
"""

REPORT_KEYS = {
    "system", "outcome", "classes", "template_classes", "iterations", "enlargements",
    "solver_seconds", "wall_seconds", "verdicts", "reason", "cached", "stats",
}


@pytest.fixture
def countdown(tmp_path):
    p = tmp_path / "countdown.sys"
    p.write_text(COUNTDOWN)
    return p


class TestUsage:
    def test_no_command(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == EXIT_USAGE

    def test_bad_flag(self):
        with pytest.raises(SystemExit) as exc:
            main(["learn", "x.sys", "--bogus"])
        assert exc.value.code == EXIT_USAGE

    def test_missing_file(self, capsys):
        assert main(["simulate", "/nonexistent.sys", "1"]) == EXIT_USAGE

    def test_syntax_error(self, tmp_path, capsys):
        p = tmp_path / "bad.sys"
        p.write_text("vars x\ntransitions\n  x > 0 -> x := x - 1\n")
        assert main(["simulate", str(p), "1"]) == EXIT_USAGE
        assert "error" in capsys.readouterr().err

    def test_next_operator_rejected(self, countdown, capsys):
        assert main(["check", str(countdown), "X zero"]) == EXIT_USAGE
        assert "next" in capsys.readouterr().err

    def test_unknown_suite(self, capsys):
        assert main(["bench", "no-such-suite"]) == EXIT_USAGE

    def test_no_solver(self, countdown, capsys):
        assert main(["check", str(countdown), "F zero", "--solver", "/nonexistent/z3"]) == EXIT_NO_SOLVER


class TestSimulate:
    def test_trajectory(self, capsys):
        assert main(["simulate", str(SYSTEMS / "euclid-term.sys"), "7", "5", "--steps", "3"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "   0  (7, 5)  {}"
        assert lines[3] == "   3  (2, 1)  {}"

    def test_comma_state(self, capsys):
        assert main(["simulate", str(SYSTEMS / "euclid-term.sys"), "3,3", "--steps", "0"]) == EXIT_OK
        assert capsys.readouterr().out.strip() == "0  (3, 3)  {terminated}"

    def test_wrong_dimension(self, capsys):
        assert main(["simulate", str(SYSTEMS / "euclid-term.sys"), "3"]) == EXIT_USAGE


@needs_solver
class TestLearnAndCheck:
    def test_learn_writes_outputs(self, countdown, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["learn", str(countdown), "--out", str(out), "-f", "F zero", "--oracle"])
        assert code == EXIT_OK
        for suffix in (".bdt.txt", ".quotient.dot", ".quotient.tbl", ".report.json"):
            assert (out / f"countdown{suffix}").exists()
        doc = json.loads((out / "countdown.report.json").read_text())
        assert REPORT_KEYS <= set(doc)
        assert doc["outcome"] == "learned" and doc["classes"] == 2
        assert doc["verdicts"] == [{"formula": "F zero", "holds": True, "lasso": None}]
        assert doc["oracle"]["conditions"] == "ok" and doc["oracle"]["partition"] == "ok"
        assert "learned 2 classes" in capsys.readouterr().out

    def test_check_holds_and_fails(self, countdown, capsys):
        assert main(["check", str(countdown), "F zero", "F G zero"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "F zero: Holds" in out and "F G zero: Holds" in out
        assert main(["check", str(countdown), "G zero"]) == EXIT_FAILS
        out = capsys.readouterr().out
        assert "G zero: Fails" in out and "counterexample" in out

    def test_formula_and_negation_disagree(self, tmp_path, capsys):
        # with a single initial state exactly one of f and !f holds
        p = tmp_path / "single.sys"
        p.write_text(COUNTDOWN.replace("init x >= 0", "init x = 5"))
        for f in ("F zero", "G zero", "!zero U zero", "G F zero"):
            a = main(["check", str(p), f])
            b = main(["check", str(p), f"!({f})"])
            assert {a, b} == {EXIT_OK, EXIT_FAILS}

    def test_inconclusive(self, tmp_path, capsys):
        code = main(["learn", str(SYSTEMS / "fig8.sys"), "--out", str(tmp_path), "--max-enlarge", "0"])
        assert code == EXIT_INCONCLUSIVE
        doc = json.loads((tmp_path / "fig8.report.json").read_text())
        assert doc["outcome"] == "inconclusive" and doc["reason"] == "budget exhausted"
        assert not (tmp_path / "fig8.quotient.dot").exists()
        assert main(["check", str(SYSTEMS / "fig8.sys"), "F zero", "--max-enlarge", "0"]) == EXIT_INCONCLUSIVE

    def test_cache(self, countdown, tmp_path, capsys):
        cache = tmp_path / "cache"
        out = tmp_path / "out"
        assert main(["learn", str(countdown), "--out", str(out), "--cache", str(cache)]) == EXIT_OK
        assert not json.loads((out / "countdown.report.json").read_text())["cached"]
        assert len(list(cache.iterdir())) == 1
        assert main(["learn", str(countdown), "--out", str(out), "--cache", str(cache)]) == EXIT_OK
        assert json.loads((out / "countdown.report.json").read_text())["cached"]
        assert main(["learn", str(countdown), "--out", str(out), "--cache", str(cache), "--no-cache"]) == EXIT_OK
        assert not json.loads((out / "countdown.report.json").read_text())["cached"]

    def test_cache_env(self, countdown, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("BISIMLEARN_CACHE", str(tmp_path / "envcache"))
        assert main(["check", str(countdown), "F zero"]) == EXIT_OK
        assert (tmp_path / "envcache").exists()

    def test_oracle_disagreement_exit_code(self, countdown, tmp_path, monkeypatch, capsys):
        import bisimlearn.cli as cli

        monkeypatch.setattr(cli, "_oracle_check", lambda *a: {"conditions": "ok", "partition": "Violation(...)"})
        assert main(["learn", str(countdown), "--out", str(tmp_path), "--oracle"]) == EXIT_ORACLE
        assert main(["check", str(countdown), "F zero", "--oracle"]) == EXIT_ORACLE

    def test_module_entry_point(self, countdown):
        proc = subprocess.run(
            [sys.executable, "-m", "bisimlearn", "check", str(countdown), "G zero"],
            capture_output=True, text=True,
        )
        assert proc.returncode == EXIT_FAILS
        assert "G zero: Fails" in proc.stdout
