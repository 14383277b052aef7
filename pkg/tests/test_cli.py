from pathlib import Path

import numpy as np
import pytest

from parabolica import cli
from parabolica import continuation as ct
from parabolica.config import read_csv, read_toml
from parabolica.errors import CollisionEncountered, NotConverged

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write_config(path, extra=""):
    path.write_text(
        """
[problem]
alpha = 1.5
centres = [{pos = [1.0, 0.0, 0.0], mass = 1.0}, {pos = [-1.0, 0.0, 0.0], mass = 1.0}]
xi_minus = [1.0, 2.0, 2.0]
xi_plus = [2.0, 1.0, -2.0]
"""
        + extra
    )
    return path


def test_kepler_span_prints_round_trip_value(capsys):
    assert cli.main(["kepler", "span", "--alpha", "1.5"]) == 0
    assert float(capsys.readouterr().out.strip()) == pytest.approx(4 * np.pi, abs=1e-9)


def test_kepler_shoot_outputs(tmp_path):
    code = cli.main(["kepler", "shoot", "--alpha", "1.5", "--theta1", "0", "--theta2", "2", "--l", "1",
                     "--out", str(tmp_path)])
    assert code == 0
    header, data = read_csv(tmp_path / "kepler_arc.csv")
    assert header == ["t", "r", "theta", "x", "y", "energy_residual", "angmom_residual"]
    assert np.max(np.abs(data[:, 5])) < 1e-9
    summary = read_toml(tmp_path / "kepler_summary.toml")
    assert summary["l"] == 1 and summary["action"] < summary["action_bound"]


def test_kepler_no_solution_exit_code(tmp_path):
    code = cli.main(["kepler", "shoot", "--alpha", "1", "--theta1", "0", "--theta2", "3.14159", "--l", "1",
                     "--out", str(tmp_path)])
    assert code == cli.EXIT_NO_SOLUTION
    assert not any(tmp_path.iterdir())


def test_kepler_index(tmp_path, capsys):
    assert cli.main(["kepler", "index", "--alpha", "1.5", "--out", str(tmp_path)]) == 0
    assert read_toml(tmp_path / "kepler_index.toml")["perpendicular_index"] >= 3


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["kepler", "bogus", "--alpha", "1"],
        ["kepler", "span"],
        ["kepler", "span", "--alpha", "2.5"],
        ["kepler", "shoot", "--alpha", "1.5"],
        ["solve", "missing.toml", "--R", "20"],
    ],
)
def test_usage_errors(argv):
    assert cli.main(argv) == cli.EXIT_USAGE


def test_bad_config_and_radius(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[problem]\nalpha = 1.5\n")
    assert cli.main(["solve", str(bad), "--R", "20"]) == cli.EXIT_USAGE
    good = write_config(tmp_path / "good.toml")
    assert cli.main(["solve", str(good), "--R", "5", "--out", str(tmp_path / "o")]) == cli.EXIT_USAGE


def test_thread_cap(monkeypatch):
    env = {"PARABOLICA_THREADS": "3"}
    assert cli.apply_thread_cap(env) == 3 and env["OMP_NUM_THREADS"] == "3"
    with pytest.raises(cli.UsageError):
        cli.apply_thread_cap({"PARABOLICA_THREADS": "zero"})
    monkeypatch.setenv("PARABOLICA_THREADS", "0")
    assert cli.main(["kepler", "span", "--alpha", "1"]) == cli.EXIT_USAGE


def test_solve_failure_exit_codes(tmp_path, monkeypatch):
    cfg = write_config(tmp_path / "c.toml")

    def collide(*a, **k):
        raise CollisionEncountered("hit centre 1")

    monkeypatch.setattr(ct, "solve_at_R", collide)
    assert cli.main(["solve", str(cfg), "--R", "20", "--out", str(tmp_path / "a")]) == cli.EXIT_COLLISION
    assert read_toml(tmp_path / "a" / "candidate.toml")["generalized_candidate"] is True

    def stall(*a, **k):
        raise NotConverged("stalled")

    monkeypatch.setattr(ct, "solve_at_R", stall)
    assert cli.main(["solve", str(cfg), "--R", "20", "--out", str(tmp_path / "b")]) == cli.EXIT_NOT_CONVERGED


def test_continue_reports_hypothesis_violation(tmp_path, monkeypatch):
    cfg = write_config(tmp_path / "c.toml", "\n[schedule]\nR = [20.0, 40.0]\n")
    report = ct.HypothesisReport([20.0], [1.0], [0.5], [2.0], [], [], [1.0],
                                 {"min_radius_bounded": False})
    monkeypatch.setattr(ct, "run_schedule", lambda *a, **k: ([], report))
    monkeypatch.setattr(ct, "level_scaling", lambda *a, **k: {"skipped": True})
    out = tmp_path / "o"
    assert cli.main(["continue", str(cfg), "--out", str(out)]) == cli.EXIT_HYPOTHESIS
    assert read_toml(out / "report.toml")["hypotheses"]["checks"]["min_radius_bounded"] is False


@pytest.mark.slow
def test_solve_two_centre_end_to_end(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    out = tmp_path / "run"
    assert cli.main(["solve", str(CONFIGS / "two_centre_R20.toml"), "--R", "20", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["critical_path.toml", "solution.toml", "trajectory.csv"]
    header, data = read_csv(out / "trajectory.csv")
    assert np.max(np.abs(data[:, 7])) < 1e-6
    doc = read_toml(out / "solution.toml")
    assert doc["record"]["morse_index"] <= 1
    assert doc["diagnostics"]["worst"] >= -1e-8
    assert [p.name for p in tmp_path.iterdir()] == ["run"]
