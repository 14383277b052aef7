import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from parabolica import kepler as kp
from parabolica import pathspace as ps
from parabolica.continuation import asymptotic_fit
from parabolica.errors import DegenerateEndpoints, DomainError, NoSolutionInClass

alphas = st.sampled_from([1.0, 1.2, 1.5, 1.75])
mus = st.floats(0.2, 5.0)


def cartesian_reintegrate(arc):
    """Integrate ``x'' = -mu x/|x|^(a+2)`` from the first sample over the arc's duration."""
    a, mu = arc.problem.alpha, arc.problem.mu

    def rhs(t, y):
        x = y[:2]
        return np.concatenate([y[2:], -mu * x / np.hypot(*x) ** (a + 2)])

    y0 = np.concatenate([arc.xy[0], arc.velocity[0]])
    scale = arc.rho_star_attained
    sol = solve_ivp(rhs, (arc.t[0], arc.t[-1]), y0, method="DOP853", rtol=1e-13, atol=1e-14 * scale)
    return sol.y[:2, -1]


def test_index_counters_conventions():
    assert kp.index_counters(1.0) == (1, 0)
    assert kp.index_counters(1.5) == (3, 1)
    assert kp.index_counters(1.6) == (4, 2)
    assert kp.index_counters(1.4) == (3, 1)
    with pytest.raises(ValueError):
        kp.index_counters(2.0)


@settings(max_examples=30, deadline=None)
@given(alphas, mus)
def test_entire_span_closed_form(alpha, mu):
    assert kp.entire_span(kp.HomogeneousProblem(mu, alpha)) == pytest.approx(2 * np.pi / (2 - alpha), abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(alphas, mus, st.floats(0.02, 0.98), st.floats(0.02, 0.98))
def test_theta_strictly_decreasing(alpha, mu, u1, u2):
    if abs(u1 - u2) < 1e-3:
        return
    P = kp.HomogeneousProblem(mu, alpha)
    c1, c2 = sorted([u1, u2])
    c1, c2 = c1 * P.c_max, c2 * P.c_max
    assert kp.theta_span(P, c1) > kp.theta_span(P, c2)


@settings(max_examples=25, deadline=None)
@given(alphas, mus, st.floats(0.01, 0.99))
def test_theta_matches_closed_form(alpha, mu, u):
    P = kp.HomogeneousProblem(mu, alpha)
    c = u * P.c_max
    assert kp.theta_span(P, c) == pytest.approx(kp.closed_form_theta(P, c), abs=1e-10)
    assert kp.theta_span(P, -c) == pytest.approx(-kp.theta_span(P, c), abs=1e-14)


def test_orbit_matches_closed_form():
    P = kp.HomogeneousProblem(2.0, 1.3)
    arc = kp.entire_arc(P, 0.7, 5.0, n_samples=512)
    r_closed = kp.closed_form_orbit(P, 0.7, arc.theta)
    assert np.max(np.abs(arc.r - r_closed) / arc.r) < 1e-10


@pytest.mark.parametrize("alpha, l", [(1.0, 0), (1.0, -1), (1.5, 1), (1.5, -2)])
def test_shoot_conserves_and_lands(alpha, l):
    P = kp.HomogeneousProblem(1.0, alpha)
    arc = kp.shoot(P, 0.3, 2.0, l)
    target = 2.0 - 0.3 + 2 * np.pi * l
    assert arc.theta[0] == pytest.approx(0.3, abs=1e-14)
    assert arc.theta[-1] == pytest.approx(0.3 + target, abs=1e-9)
    assert arc.r[0] == pytest.approx(1.0, abs=1e-12) and arc.r[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(arc.energy_residual)) < 1e-9
    assert np.max(np.abs(arc.angmom_residual)) < 1e-9
    end = cartesian_reintegrate(arc)
    assert np.linalg.norm(end - [np.cos(2.0), np.sin(2.0)]) < 1e-6


def test_bisection_independent_of_bracket():
    P = kp.HomogeneousProblem(1.0, 1.5)
    a = kp.shoot(P, 0.0, 2.5, 0).angular_momentum
    b = kp.shoot(P, 0.0, 2.5, 0, bracket=(0.2 * P.c_max, 0.999 * P.c_max)).angular_momentum
    assert abs(a - b) < 1e-10


def test_shoot_rejects_unreachable_and_degenerate():
    P = kp.HomogeneousProblem(1.0, 1.0)
    with pytest.raises(NoSolutionInClass):
        kp.shoot(P, 0.0, np.pi, 1)
    with pytest.raises(DegenerateEndpoints):
        kp.shoot(P, 1.0, 1.0, 0)


def test_action_closed_form_and_bound():
    P = kp.HomogeneousProblem(3.0, 1.5)
    bound = kp.action_bound(P)
    for target in (0.5, 3.0, 9.0, 12.0, -7.0):
        arc = kp.shoot(P, 0.0, target, 0)
        A = kp.action_of_arc(arc)
        assert A < bound
        assert A == pytest.approx(kp.closed_form_action(P, arc.angular_momentum), rel=1e-10)


def test_sampled_action_agrees_when_resolved():
    P = kp.HomogeneousProblem(1.0, 1.2)
    arc = kp.shoot(P, 0.0, 1.0, 0, n_samples=4096)
    assert kp.action_by_samples(arc) == pytest.approx(kp.action_of_arc(arc), rel=1e-8)


@pytest.mark.parametrize("alpha", [1.0, 1.4, 1.6])
def test_self_intersections_equal_i_star(alpha):
    P = kp.HomogeneousProblem(1.0, alpha)
    poly = kp.entire_arc_polyline(P)
    assert kp.count_self_intersections(poly) == kp.index_counters(alpha)[1]


def test_rectilinear_arc_and_domain():
    P = kp.HomogeneousProblem(2.0, 1.5)
    arc = kp.rectilinear_arc(P, 0.0, [0.0, 1.0], "future", (0.5, 4.0))
    g = kp.gamma_const(1.5, 2.0)
    assert np.allclose(arc.r, g * arc.t ** (2 / 3.5))
    assert np.max(np.abs(arc.energy_residual)) < 1e-12 * np.max(arc.problem.potential(arc.r))
    with pytest.raises(DomainError):
        kp.rectilinear_arc(P, 1.0, [1.0, 0.0], "future", (0.0, 2.0))


@pytest.mark.parametrize("alpha", [1.0, 1.5])
def test_tail_fit_recovers_parabolic_law(alpha):
    P = kp.HomogeneousProblem(1.0, alpha)
    arc = kp.entire_arc(P, 1.0, 1e10, n_samples=20000)
    z = np.zeros(len(arc.t))
    traj = ps.TrueTimeTrajectory(arc.t, np.column_stack([arc.xy, z]), np.column_stack([arc.velocity, z]), 1e10)
    fit = asymptotic_fit(traj, K=1e3 * arc.rho_star_attained)
    assert fit.exponent == pytest.approx(2 / (2 + alpha), rel=1e-2)
    assert fit.prefactor == pytest.approx(kp.gamma_const(alpha, 1.0), rel=2e-2)


def test_perpendicular_index_grows_with_L():
    P = kp.HomogeneousProblem(1.0, 1.5)
    counts = [kp.perpendicular_index(P, L, 1024) for L in (1.0, 8.0, 64.0, 512.0)]
    assert counts == sorted(counts)
    assert counts[-1] >= 3
