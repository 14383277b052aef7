import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from parabolica import kepler as kp
from parabolica import pathspace as ps
from parabolica import potential as pot
from parabolica import solver as sv

ONE = pot.CentreConfiguration(1.5, [[0, 0, 0]], [1.0])
KEPLER_PAIR = pot.CentreConfiguration(1.0, [[0, 0, 0], [3, 1, 0]], [1.0, 0.5])
BETA0 = ps.StrongForceModifier(0.0)


def unit_arc_minimizer(theta, n=256):
    q_minus = np.array([1.0, 0.0, 0.0])
    q_plus = np.array([np.cos(theta), np.sin(theta), 0.0])
    path = ps.DiscretePath.straight(q_minus, q_plus, n, ps.stretched_times(n, 1.0))
    return sv.minimize(path, BETA0, ONE)


@pytest.fixture(scope="module")
def minimizer():
    return unit_arc_minimizer(2.0)


def test_default_beta_schedule():
    sched = sv.default_beta_schedule()
    assert sched[0] == 1.0 and sched[-1] == 0.0 and sched[-2] == 2.0**-20
    assert all(b < a for a, b in zip(sched, sched[1:]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 4))
def test_morse_index_methods_agree(seed, n_neg):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(30, 30)))
    ev = np.concatenate([-rng.uniform(0.1, 5, n_neg), rng.uniform(0.1, 5, 30 - n_neg)])
    H = (Q * ev) @ Q.T
    H = 0.5 * (H + H.T)
    k, _ = sv.morse_index_dense(H)
    assert k == n_neg
    assert sv.morse_index_inertia(H) == n_neg


@pytest.mark.parametrize("theta", [1.0, 3.0])
def test_minimizer_matches_kepler_action(theta):
    cp = unit_arc_minimizer(theta)
    arc = kp.shoot(kp.HomogeneousProblem(1.0, 1.5), 0.0, theta, 0)
    assert cp.morse_index == 0 and cp.morse_index_check == 0
    assert cp.grad_norm < sv.SolverOptions().tol_grad
    assert np.sqrt(2 * cp.value) == pytest.approx(kp.action_of_arc(arc), rel=1e-5)
    assert cp.omega == pytest.approx(arc.t[-1], rel=1e-4)


def test_critical_point_reparameterizes_to_a_solution(minimizer):
    traj = ps.to_true_time(minimizer.path, BETA0, ONE)
    interior = slice(8, -8)
    scale = np.max(np.linalg.norm(pot.eval_gradV(ONE, traj.x), axis=1))
    acc = traj.interpolator()(traj.t[interior], 2)
    res = np.linalg.norm(acc - pot.eval_gradV(ONE, traj.x[interior]), axis=1)
    assert np.max(res) < 1e-3 * scale
    assert np.max(np.abs(traj.residual)) < 1e-4 * np.max(pot.eval_V(ONE, traj.x))


def test_polish_gives_ode_solution(minimizer):
    res = sv.polish_trajectory(minimizer.path, ONE, segments=16)
    assert res.energy_residual < 1e-9
    assert res.boundary_error < 1e-9
    arc = kp.shoot(kp.HomogeneousProblem(1.0, 1.5), 0.0, 2.0, 0)
    assert res.omega == pytest.approx(arc.t[-1], rel=1e-8)
    traj = res.trajectory
    assert traj.t[0] == pytest.approx(-res.omega) and traj.t[-1] == pytest.approx(res.omega)
    # min radius is the pericentre of the exact arc
    assert traj.radius.min() == pytest.approx(arc.r.min(), rel=1e-6)


def test_beta_continuation_rejects_bad_schedules():
    loop = ps.PathLoop(np.zeros((8, 17, 3)) + np.linspace(-1, 1, 17)[None, :, None] * [5.0, 1.0, 0.0], ps.uniform_times(16))
    cfg = pot.CentreConfiguration.from_centres(1.5, [([1, 0, 0], 1.0), ([-1, 0, 0], 1.0)])
    with pytest.raises(ValueError):
        sv.beta_continuation(loop, cfg, beta_schedule=(1.0, 0.5))
    with pytest.raises(ValueError):
        sv.beta_continuation(loop, cfg, beta_schedule=(0.5, 1.0, 0.0))


# ---------------------------------------------------------------------------
# regularization


def test_sperling_parity_on_random_states():
    rng = np.random.default_rng(0)
    Z = rng.normal(size=(1000, 9))
    Zr = Z.copy()
    Zr[:, 3:6] *= -1
    f1, f2, f3 = sv.sperling_field(Z, KEPLER_PAIR, 0)
    g1, g2, g3 = sv.sperling_field(Zr, KEPLER_PAIR, 0)
    assert np.max(np.abs(f1 + g1)) == 0.0
    assert np.max(np.abs(f2 - g2)) <= 1e-15 * np.max(np.abs(f2))
    assert np.max(np.abs(f3 + g3)) <= 1e-15 * np.max(np.abs(f3))


def test_regularization_needs_kepler_exponent():
    with pytest.raises(ValueError):
        sv.RegularizedState.from_physical([1, 0, 0], [0, 1, 0], ONE)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_regularized_state_roundtrip(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=3)
    v = rng.normal(size=3)
    if np.linalg.norm(x) < 1e-3 or np.linalg.norm(x - KEPLER_PAIR.positions[1]) < 1e-3:
        return
    s = sv.RegularizedState.from_physical(x, v, KEPLER_PAIR, 0)
    xb, vb = s.to_physical(KEPLER_PAIR, 0)
    assert np.allclose(xb, x, atol=1e-14) and np.allclose(vb, v, rtol=1e-13, atol=1e-14)
    assert s.consistency(KEPLER_PAIR, 0) == 0.0


def radial_collision_trajectory():
    xi = np.array([1.0, 2.0, 2.0]) / 3.0
    g = kp.gamma_const(1.0, 1.0)
    t = np.linspace(-2.0, -1e-3, 400)
    r = g * np.abs(t) ** (2 / 3)
    rd = -(2 / 3) * g * np.abs(t) ** (-1 / 3)
    return ps.TrueTimeTrajectory(t, r[:, None] * xi, rd[:, None] * xi, 1.0), xi


def test_collision_passage_reflects():
    one = pot.CentreConfiguration(1.0, [[0, 0, 0]], [1.0])
    traj, xi = radial_collision_trajectory()
    P = sv.regularized_passage(traj, one, 0)
    assert P.closest_distance < 1e-12
    assert P.closest_time == pytest.approx(0.0, abs=1e-9)
    # x(tau_c + s) = x(tau_c - s) along the regularized flow
    rhs = sv._flat_sperling(one, 0)
    sol = solve_ivp(rhs, (0, P.tau[-1]), np.concatenate([P.z[0], [P.entry_time]]), method="DOP853",
                    rtol=1e-12, atol=1e-14, dense_output=True)
    s = np.linspace(0, min(P.closest_tau, P.tau[-1] - P.closest_tau), 50)
    diff = sol.sol(P.closest_tau + s)[:3] - sol.sol(P.closest_tau - s)[:3]
    assert np.max(np.abs(diff)) < 1e-6
    # w at the collision points along the incoming direction, magnitude m
    w = P.w_closest
    assert np.linalg.norm(np.cross(w, xi)) < 1e-6 * np.linalg.norm(w)
    assert np.linalg.norm(w) == pytest.approx(1.0, rel=1e-6)


def near_miss(offset, t_end=4.0, samples=2001):
    x0 = np.array([-2.0, 0.3, 0.1])
    d = -x0 + np.array([0.0, offset, 0.0])
    d /= np.linalg.norm(d)
    v0 = np.sqrt(2 * pot.eval_V(KEPLER_PAIR, x0)) * d
    f = lambda t, u: np.concatenate([u[3:], pot.eval_gradV(KEPLER_PAIR, u[:3])])  # noqa: E731
    ts = np.linspace(0, t_end, samples)
    s = solve_ivp(f, (0, t_end), np.concatenate([x0, v0]), method="DOP853", rtol=1e-13, atol=1e-15, t_eval=ts)
    return ps.TrueTimeTrajectory(s.t, s.y[:3].T, s.y[3:].T, 1.0)


def test_regularized_agrees_with_direct_on_near_miss():
    traj = near_miss(0.01)
    P = sv.regularized_passage(traj, KEPLER_PAIR, 0)
    after = traj.t > P.exit_time
    assert np.max(np.abs(P.trajectory.x[-after.sum():] - traj.x[after])) < 1e-6
    # the stored regularized samples satisfy the field equation
    h = P.tau[1] - P.tau[0]
    dz = (P.z[2:] - P.z[:-2]) / (2 * h)
    F = np.hstack(sv.sperling_field(P.z[1:-1], KEPLER_PAIR, 0))
    assert np.max(np.abs(dz - F)) < 1e-5 * np.max(np.abs(F))
    k = len(P.tau) // 3
    st_ = sv.RegularizedState(P.tau[k], P.z[k, :3], P.z[k, 3:6], P.z[k, 6:])
    assert st_.consistency(KEPLER_PAIR, 0) < 1e-8


def test_passage_requires_an_approach():
    traj = near_miss(0.5)
    with pytest.raises(ValueError):
        sv.regularized_passage(traj, KEPLER_PAIR, 0)


def test_blow_up_converges_to_homogeneous_problem():
    residuals = []
    for off in (0.1, 0.01, 0.001):
        traj = near_miss(off, t_end=2.5, samples=20001)
        b = sv.blow_up_rescale(traj, KEPLER_PAIR, 0)
        assert np.min(np.linalg.norm(b.v, axis=1)) >= 1 - 1e-9
        residuals.append(b.residual)
    assert residuals[0] > residuals[1] > residuals[2]
