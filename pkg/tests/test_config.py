import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parabolica.config import (
    TRAJECTORY_HEADER,
    load_run_config,
    parse_run_config,
    read_csv,
    read_toml,
    write_csv,
    write_toml,
    write_trajectory_csv,
)
from parabolica.errors import InvalidConfiguration
from parabolica.pathspace import TrueTimeTrajectory


def base_doc():
    return {
        "problem": {
            "alpha": 1.5,
            "centres": [{"pos": [1.0, 0.0, 0.0], "mass": 1.0}, {"pos": [-1.0, 0.0, 0.0], "mass": 1.0}],
            "xi_minus": [1.0, 2.0, 2.0],
            "xi_plus": [2.0, 1.0, -2.0],
        },
        "schedule": {"K_multiples": [10, 20]},
        "solver": {"tol_grad": 1e-9, "loop_size": 12},
        "output": {"dir": "results"},
    }


def test_parse_normalizes_directions_and_resolves_schedule(tmp_path):
    rc = parse_run_config(base_doc(), tmp_path)
    assert np.allclose(rc.xi_minus, [1 / 3, 2 / 3, 2 / 3])
    assert rc.schedule(2.0) == [20.0, 40.0]
    assert rc.solver.tol_grad == 1e-9 and rc.solver.loop_size == 12
    assert rc.out_dir == tmp_path / "results"


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(extra={}),
        lambda d: d["problem"].update(colour="red"),
        lambda d: d["problem"].pop("xi_plus"),
        lambda d: d["problem"].update(alpha=2.5),
        lambda d: d["problem"].update(xi_minus=[0, 0, 0]),
        lambda d: d["problem"]["centres"].append({"pos": [1.0, 0.0, 0.0], "mass": 1.0}),
        lambda d: d["problem"]["centres"][0].update(charge=1),
        lambda d: d["schedule"].update(R=[-1.0]),
        lambda d: d["solver"].update(max_iters=1.5),
        lambda d: d["solver"].update(beta_schedule=[1.0, 0.5]),
        lambda d: d["solver"].update(beta_schedule=[0.5, 1.0, 0.0]),
        lambda d: d["solver"].update(loop_size=4),
        lambda d: d["output"].update(verbosity="loud"),
    ],
)
def test_invalid_documents_rejected(mutate):
    doc = base_doc()
    mutate(doc)
    with pytest.raises(InvalidConfiguration):
        parse_run_config(doc)


def test_toml_roundtrip(tmp_path):
    rc = parse_run_config(base_doc(), tmp_path)
    path = tmp_path / "run.toml"
    write_toml(rc.to_dict(), path)
    again = load_run_config(path)
    a, b = again.to_dict()["problem"], rc.to_dict()["problem"]
    assert a["alpha"] == b["alpha"] and a["centres"] == b["centres"]
    # directions are renormalized on load, which may move the last bit
    assert np.allclose(a["xi_minus"], b["xi_minus"], rtol=0, atol=1e-15)
    assert np.allclose(a["xi_plus"], b["xi_plus"], rtol=0, atol=1e-15)
    assert again.solver == rc.solver


def test_malformed_toml_is_a_config_error(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[problem\nalpha = 1")
    with pytest.raises(InvalidConfiguration):
        load_run_config(path)


def test_write_toml_converts_numpy(tmp_path):
    write_toml({"a": np.float64(1.5), "b": np.arange(3), "c": np.bool_(True), "skip": None}, tmp_path / "x.toml")
    assert read_toml(tmp_path / "x.toml") == {"a": 1.5, "b": [0, 1, 2], "c": True}


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=20))
def test_csv_roundtrip_is_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("csv") / "v.csv"
    write_csv(path, ["a", "b"], [values, values[::-1]])
    header, data = read_csv(path)
    assert header == ["a", "b"]
    assert all(math.copysign(1, a) == math.copysign(1, b) and a == b for a, b in zip(data[:, 0], values))


def test_trajectory_csv_layout(tmp_path):
    t = np.linspace(-1, 1, 5)
    x = np.stack([t, t**2, 1 + 0 * t], axis=1)
    traj = TrueTimeTrajectory(t, x, np.ones_like(x) / 3, 1.0, residual=t / 7)
    write_trajectory_csv(traj, tmp_path / "tr.csv")
    header, data = read_csv(tmp_path / "tr.csv")
    assert header == TRAJECTORY_HEADER
    assert np.array_equal(data[:, 0], t) and np.array_equal(data[:, 1:4], x) and np.array_equal(data[:, 7], t / 7)
