import math
from types import SimpleNamespace

import numpy as np
import pytest

from parabolica import continuation as ct
from parabolica import kepler as kp
from parabolica import pathspace as ps
from parabolica import potential as pot
from parabolica.errors import DegenerateDirections, InsufficientTail

from conftest import XI_MINUS, XI_PLUS


def synthetic_trajectory(gamma=1.3, alpha=1.5, t_max=1e6, n=20000):
    p = 2 / (2 + alpha)
    t = np.geomspace(1.0, t_max, n)
    r = gamma * t**p * (1 + 0.01 / t)
    x = np.zeros((n, 3))
    x[:, 0] = r
    v = np.gradient(x, t, axis=0)
    return ps.TrueTimeTrajectory(t, x, v, t_max)


def test_fit_recovers_exponent_on_synthetic_law():
    traj = synthetic_trajectory()
    fit = ct.asymptotic_fit(traj, K=10.0)
    assert fit.exponent == pytest.approx(2 / 3.5, rel=5e-3)
    assert fit.prefactor == pytest.approx(1.3, rel=2e-2)
    assert fit.window[0] >= 2 * 10.0 and fit.residual < 1e-3
    assert np.allclose(fit.direction, [1, 0, 0]) and fit.s_variation == pytest.approx(0.0, abs=1e-12)


def test_fit_window_rules():
    traj = synthetic_trajectory()
    with pytest.raises(ValueError):
        ct.asymptotic_fit(traj, K=10.0, window=(15.0, 100.0))
    with pytest.raises(InsufficientTail):
        ct.asymptotic_fit(traj, K=1e5)


def test_bounded_criterion():
    assert ct.bounded([1.0, 1.2, 1.1])
    assert not ct.bounded([1.0, 1.0, 1.2])
    assert ct.bounded([3.0, 2.0, 1.0])


def fake_record(R, offset, t_minus=-2.0, t_plus=2.0, action=0.0):
    t = np.linspace(-5, 5, 101)
    x = np.stack([t, offset + 0 * t, 0 * t], axis=1)
    v = np.tile([1.0, 0.0, 0.0], (len(t), 1))
    traj = ps.TrueTimeTrajectory(t, x, v, 5.0)
    return ct.ContinuationRecord(R, traj, R, 1.0, [0.5, 0.6], t_minus, t_plus, 0.0, action, 1, 10.0)


def test_hypothesis_report_on_constructed_records():
    recs = [fake_record(R, 1.0 + 0.5**k) for k, R in enumerate((100, 200, 400, 800))]
    rep = ct.hypothesis_report(recs)
    assert rep.cauchy == pytest.approx([0.5, 0.25, 0.125])
    assert rep.cauchy_ratios == pytest.approx([0.5, 0.5])
    assert rep.checks["cauchy_halving"] and rep.checks["min_radius_bounded"] and rep.checks["omega_gap_growing"]
    slow = [fake_record(R, 1.0 + 0.8**k) for k, R in enumerate((100, 200, 400))]
    assert not ct.hypothesis_report(slow).checks["cauchy_halving"]


def test_level_scaling_on_exact_law(two_centre):
    a, m = two_centre.alpha, two_centre.total_mass
    theory = math.sqrt(2 * m / a) * 4 / (2 - a)
    recs = [fake_record(R, 0.0, action=theory * R ** (1 - a / 2) - 10.0) for R in (100.0, 200.0, 400.0)]
    out = ct.level_scaling(recs, two_centre)
    assert out["relative_slope_error"] < 1e-12
    assert out["offset_band"] == pytest.approx(10.0) and out["offset_band_non_growing"]
    assert ct.level_scaling(recs[:2], two_centre)["skipped"]


def test_directions_validated(two_centre):
    with pytest.raises(DegenerateDirections):
        ct.solve_at_R(two_centre, XI_PLUS, XI_PLUS, 20.0)
    with pytest.raises(ValueError):
        ct.solve_at_R(two_centre, 2 * XI_PLUS, XI_MINUS, 20.0)


def test_node_count_and_grid(two_centre):
    K = 9.5
    assert ct.node_count(10 * K, K) == 256 and ct.node_count(40 * K, K) == 512 and ct.node_count(41 * K, K) == 768
    t = ct.time_grid(two_centre, 100.0, 256)
    assert t[0] == -1 and t[-1] == 1 and np.all(np.diff(t) > 0)
    assert np.diff(t)[128] < np.diff(t)[0] / 10


def test_s_variation_constants_positive():
    c = ct.s_variation_constants(1.5, 2.0, 17.856)
    assert all(v > 0 for v in c)
    assert c[3] == pytest.approx(2 ** (15.5 / 8) / 0.5)


def kepler_trajectory(alpha=1.5, mu=2.0, c=1.0, half=2e3):
    P = kp.HomogeneousProblem(mu, alpha)
    arc = kp.entire_arc(P, c, half, n_samples=8000)
    z = np.zeros(len(arc.t))
    return ps.TrueTimeTrajectory(arc.t, np.column_stack([arc.xy, z]), np.column_stack([arc.velocity, z]), half)


def test_diagnostics_hold_on_single_centre_arc():
    cfg = pot.CentreConfiguration(1.5, [[0, 0, 0]], [2.0])
    consts = pot.PotentialConstants(0.5, 2.0, 1.0, 4.0)
    rep = ct.diagnostics(kepler_trajectory(), cfg, consts)
    assert rep.ok()
    assert len(rep.details["arcs"]) == 2


def test_monotone_far_arcs_split_at_turning_point():
    traj = kepler_trajectory()
    arcs = ct.monotone_far_arcs(traj, 0.0)
    assert [s for _, _, s in arcs] == [-1, 1]


# ---------------------------------------------------------------------------
# solved two-centre records


def test_record_time_shift_symmetric(r20_record):
    tm, tp = r20_record.shifted_crossings
    assert tm == pytest.approx(-tp, abs=1e-12)
    tm2, tp2 = ct.crossing_times(r20_record.trajectory, r20_record.K)
    assert tm2 == pytest.approx(-tp2, abs=1e-8)
    assert r20_record.t_minus <= r20_record.t_plus and r20_record.action > 0


def test_record_r_has_single_far_minimum(r20_record):
    traj = r20_record.trajectory
    r = traj.radius
    far = r >= r20_record.K
    rdot = np.einsum("ij,ij->i", traj.x, traj.v) / r
    # outside K the radius only decreases before the inner passage and only increases after it
    first_in, last_in = np.nonzero(~far)[0][[0, -1]]
    assert np.all(rdot[:first_in] < 0) and np.all(rdot[last_in + 1 :] > 0)


def test_warm_and_cold_starts_agree(two_centre, two_centre_constants, r20_record):
    warm = ct.solve_at_R(two_centre, XI_PLUS, XI_MINUS, 24.0, constants=two_centre_constants, warm=r20_record)
    assert "warm_from" in warm.critical_point.history
    cold = ct.solve_at_R(two_centre, XI_PLUS, XI_MINUS, 24.0, constants=two_centre_constants)
    assert warm.action == pytest.approx(cold.action, rel=1e-6)


def test_record_summary_fields(r20_record):
    s = r20_record.summary()
    assert set(s) >= {"R", "omega_R", "action", "morse_index", "t_minus", "t_plus", "Delta_R"}
    assert s["Delta_R"] == pytest.approx(0.5 * (s["t_plus"] - s["t_minus"]))
    assert isinstance(SimpleNamespace(**s).min_centre_distances, list)
