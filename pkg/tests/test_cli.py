import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from equity_auctions.cli import main
from equity_auctions.config import OUTPUT_DIR_ENV, ConfigError, ExperimentConfig, config_digest, schema


def _rows(path):
    with open(path) as fh:
        body = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(body))


def _small_config(tmp_path, **over):
    cfg = {"gamma": 0.25, "marginals": [{"family": "beta22"}, {"family": "beta22"}],
           "contamination": {"eps": [0.0, 1.0], "rho": [0.0]}, "delta": 0.1,
           "output_dir": str(tmp_path / "from_config")}
    cfg.update(over)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


# -- config -------------------------------------------------------------------

def test_config_defaults_and_digest(tmp_path):
    cfg = ExperimentConfig.load(_small_config(tmp_path))
    assert cfg.groups.n == 2 and cfg.seed == 0 and cfg.rho == [0.0] and cfg.lp_backend == "auto"
    moved = ExperimentConfig.load(_small_config(tmp_path, output_dir="elsewhere"))
    assert cfg.digest() == moved.digest()
    assert config_digest({"a": 1, "b": 2}) == config_digest({"b": 2, "a": 1})


@pytest.mark.parametrize("bad", [
    {"gamma": -1.0},
    {"marginals": [{"family": "beta22"}]},
    {"marginals": [{"family": "normal"}, {"family": "beta22"}]},
    {"delta": 0.3},
    {"colour": "blue"},
    {"contamination": {"eps": [1.2], "rho": [0.0]}},
    {"lp_backend": "glpk"},
])
def test_config_rejections(tmp_path, bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(_small_config(tmp_path, **bad))


def test_config_unreadable(tmp_path):
    (tmp_path / "x.json").write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "x.json")


def test_shipped_configs_validate():
    for name in ("stress_independent", "stress_correlated"):
        cfg = ExperimentConfig.load(Path(__file__).parents[1] / "configs" / f"{name}.json")
        assert cfg.gamma == 0.25 and cfg.delta == 0.02 and len(cfg.eps) == 11
    assert "properties" in schema()


def test_output_dir_precedence(tmp_path, monkeypatch):
    cfg = ExperimentConfig.load(_small_config(tmp_path))
    assert cfg.output_dir().endswith("from_config")
    monkeypatch.setenv(OUTPUT_DIR_ENV, "env_dir")
    assert cfg.output_dir() == "env_dir"
    assert cfg.output_dir("flag_dir") == "flag_dir"


# -- commands -----------------------------------------------------------------

def test_bounds_command(tmp_path, capsys):
    assert main(["bounds", "--out-dir", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "bounds.csv")
    factor = np.array([float(r["factor"]) for r in rows])
    assert len(rows) == 1001 and float(rows[0]["gamma"]) == 0.0
    assert abs(float(rows[0]["factor"]) - 1) <= 1e-10
    assert factor.max() == pytest.approx(1.31, abs=0.01)
    head = (tmp_path / "bounds.csv").read_text().splitlines()[:3]
    assert head[0] == "# command: bounds" and head[1].startswith("# config: ") and head[2] == "# seed: none"
    assert "max factor" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["bounds", "--points", "1"],
    ["bounds", "--gamma-min", "3", "--gamma-max", "1"],
    ["evaluate", "--delta", "0.3"],
    ["evaluate", "--marginals", "uniform,beta22,beta22"],
    ["evaluate", "--eps", "2"],
    ["audit", "--gamma", "-1"],
    ["stress", "/nonexistent/config.json"],
])
def test_usage_errors_exit_2(tmp_path, argv, capsys):
    assert main(argv + ["--out-dir", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_parser_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["evaluate", "--mech", "nonsense"])
    assert exc.value.code == 2


def test_reruns_are_byte_identical(tmp_path):
    args = ["evaluate", "--mech", "robust", "stochastic", "--mode", "monte-carlo", "--samples", "5000",
            "--seed", "3", "--eps", "0.2"]
    for d in ("a", "b"):
        assert main(args + ["--out-dir", str(tmp_path / d)]) == 0
    a = (tmp_path / "a" / "evaluation.csv").read_bytes()
    assert a == (tmp_path / "b" / "evaluation.csv").read_bytes()
    assert b"# seed: 3" in a
    assert main(args[:-4] + ["--seed", "4", "--eps", "0.2", "--out-dir", str(tmp_path / "c")]) == 0
    assert a != (tmp_path / "c" / "evaluation.csv").read_bytes()


def test_evaluate_exhaustive_lp_mechanism(tmp_path):
    argv = ["evaluate", "--mech", "lp-expectation", "zero", "--delta", "0.1", "--out-dir", str(tmp_path)]
    assert main(argv) == 0
    rows = _rows(tmp_path / "evaluation.csv")
    assert rows[1]["mechanism"] == "zero" and float(rows[1]["revenue"]) == 0
    assert float(rows[0]["equity_violation"]) > 0


def test_lp_solve_command(tmp_path, capsys):
    argv = ["lp-solve", "--delta", "0.25", "--dump", "--out-dir", str(tmp_path)]
    assert main(argv) == 0
    out = capsys.readouterr().out
    assert "expected revenue" in out and "kkt" in out
    assert len(_rows(tmp_path / "mechanism.csv")) == 25
    assert (tmp_path / "lp_triples.csv").read_text().startswith("# minimize")
    first = (tmp_path / "mechanism.csv").read_bytes()
    assert main(argv) == 0
    assert first == (tmp_path / "mechanism.csv").read_bytes()
    assert main(["lp-solve", "--delta", "0.05", "--max-rows", "100", "--out-dir", str(tmp_path)]) == 2


@pytest.mark.parametrize("argv, code", [
    (["audit", "--mech", "robust", "--gamma", "0.25", "--delta", "0.05"], 0),
    (["audit", "--mech", "stochastic", "--gamma", "1", "--marginals", "uniform,uniform", "--delta", "0.05"], 0),
    (["audit", "--mech", "lp-expectation", "--gamma", "0.25", "--delta", "0.1"], 1),
])
def test_audit_exit_codes(tmp_path, argv, code):
    assert main(argv + ["--out-dir", str(tmp_path)]) == code
    rows = _rows(tmp_path / "audit.csv")
    assert bool(rows) == bool(code)
    if code:
        assert {r["constraint"] for r in rows} == {"Eq"}


def test_stress_command(tmp_path, monkeypatch, capsys):
    path = _small_config(tmp_path)
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "env"))
    assert main(["stress", str(path)]) == 0
    rev = _rows(tmp_path / "env" / "stress_revenue.csv")
    assert [r["eps"] for r in rev] == ["0", "1"]
    assert set(rev[0]) == {"eps", "rho", "tailored", "stochastic", "lp-expectation", "robust", "error"}
    assert all(float(r["tailored"]) == 1 for r in rev)
    assert all(float(r[k]) <= 1 + 1e-6 for r in rev for k in ("stochastic", "robust"))
    assert (tmp_path / "env" / "stress_regret_p75.csv").exists()
    assert main(["stress", str(path), "--out-dir", str(tmp_path / "flag")]) == 0
    a = (tmp_path / "env" / "stress_revenue.csv").read_bytes()
    assert a == (tmp_path / "flag" / "stress_revenue.csv").read_bytes()


def test_worst_case_command(capsys):
    assert main(["worst-case", "--mech", "robust", "--gamma", "0", "--delta", "0.01"]) == 0
    out = capsys.readouterr().out
    assert "worst-case regret 0.36" in out


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "equity_auctions", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("equity-auctions ")
