from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import pytest

from reservebench.cli import main

RAA = Path(__file__).resolve().parents[1] / "data" / "raa.csv"


def test_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--bogus"])
    assert exc.value.code == 1
    assert "error[usage]" in capsys.readouterr().err


def test_missing_subcommand():
    with pytest.raises(SystemExit) as exc:
        main(["study"])
    assert exc.value.code == 1


class TestTriangle:
    def test_validate(self, capsys):
        assert main(["triangle", "validate", str(RAA), "--flavor", "cumulative"]) == 0
        assert capsys.readouterr().out.strip() == "ok: n=10 mask=upper flavor=cumulative"

    def test_negative_increment(self, capsys):
        rc = main(["triangle", "validate", str(RAA), "--flavor", "cumulative", "--non-negative"])
        assert rc == 2
        assert "error[negative-increment]" in capsys.readouterr().err

    def test_parse_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2\nx\n")
        assert main(["triangle", "validate", str(bad)]) == 2
        assert "error[parse]" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["triangle", "validate", str(tmp_path / "none.csv")]) == 2
        assert "error[io]" in capsys.readouterr().err

    def test_fit(self, capsys):
        assert main(["triangle", "fit", "--model", "odp", "--triangle", str(RAA),
                     "--flavor", "cumulative"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["model"] == "odp"
        assert len(doc["mu"]) == 10
        assert sum(doc["gamma"]) == pytest.approx(1.0)
        assert doc["phi"] > 0


class TestConfig:
    def test_set_get(self, capsys):
        assert main(["config", "set", "threads", "3"]) == 0
        assert main(["config", "get", "threads"]) == 0
        assert capsys.readouterr().out.splitlines()[-1] == "3"

    def test_unknown_key(self, capsys):
        assert main(["config", "get", "colour"]) == 2
        assert "error[config]" in capsys.readouterr().err

    def test_bad_value(self, capsys):
        assert main(["config", "set", "threads", "lots"]) == 2
        assert "error[config]" in capsys.readouterr().err

    def test_path(self, tmp_path, capsys):
        assert main(["config", "path"]) == 0
        assert capsys.readouterr().out.strip().startswith(str(tmp_path))


class TestExamples:
    def test_stdout(self, capsys):
        assert main(["examples", "run", "--setting", "ex2", "--sims", "20", "--draws", "50"]) == 0
        rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
        assert [r[0] for r in rows[1:]] == ["ideal", "long_term", "ordinary", "intern"]

    def test_out_file(self, tmp_path):
        out = tmp_path / "ex1.csv"
        assert main(["examples", "run", "--setting", "ex1", "--sims", "20", "--draws", "50",
                     "--intern-location", "absolute", "--out", str(out)]) == 0
        assert out.read_text().startswith("actuary,mean_crps")

    def test_bad_sizes(self, capsys):
        assert main(["examples", "run", "--setting", "ex2", "--sims", "0"]) == 2
        assert "error[config]" in capsys.readouterr().err

    def test_bad_setting(self):
        with pytest.raises(SystemExit) as exc:
            main(["examples", "run", "--setting", "ex9"])
        assert exc.value.code == 1


class TestStudy:
    def test_run_and_report(self, tmp_path, capsys):
        out = tmp_path / "results"
        rc = main(["study", "run", "-n", "3", "-m", "60", "--methods", "gamma,uniform,ideal",
                   "--seed", "1", "--out", str(out), "--no-progress"])
        assert rc == 0
        printed = capsys.readouterr().out.split()
        assert [Path(p).name for p in printed] == [
            "summary.json", "scores.csv", "pit.csv", "ppcurve.csv", "coverage.csv",
        ]
        summary = json.loads((out / "summary.json").read_text())
        assert summary["seed"] == 1
        assert (summary["n_scenarios"], summary["m_draws"]) == (3, 60)
        assert "wall_time" not in summary

        assert main(["study", "report", "--dir", str(out), "--records", "ideal"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert [line.split()[0] for line in lines[1:4]] == ["gamma", "uniform", "ideal"]
        assert len(lines) == 4 + 3

    def test_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "study.json"
        cfg.write_text(json.dumps({
            "generator": {"model": "poisson", "mu": [50.0, 60.0, 55.0],
                          "gamma": [0.5, 0.25, 0.25]},
            "n_scenarios": 2,
            "m_draws": 40,
            "methods": ["poisson", "ideal"],
        }))
        out = tmp_path / "r"
        assert main(["study", "run", "--config", str(cfg), "--out", str(out), "--timing"]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["generator"]["model"] == "poisson"
        assert "wall_time" in summary

    def test_bad_config(self, tmp_path, capsys):
        cfg = tmp_path / "study.json"
        cfg.write_text(json.dumps({"n_scenarios": 0}))
        assert main(["study", "run", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 2
        assert "error[config]" in capsys.readouterr().err

    def test_report_missing(self, tmp_path, capsys):
        assert main(["study", "report", "--dir", str(tmp_path / "none")]) == 2
        assert "error[io]" in capsys.readouterr().err
