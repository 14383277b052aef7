"""Zero-energy arcs of the homogeneous problem ``x'' = -mu x / |x|^(alpha+2)``.

Angles and times are computed by quadrature in the variable ``eta`` with
``r = r_peri + eta^2``, which removes the inverse square-root singularity at
the pericentre.  Closed forms (``closed_form_theta`` and friends) are kept as
independent oracles and are not used by the numerical routines.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigvalsh_tridiagonal

from .errors import (
    DegenerateEndpoints,
    DegenerateRectilinear,
    DomainError,
    NoSolution,
    NoSolutionInClass,
    NumericalError,
)

GL_NODES = 128
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_NODES)
R_MAX_FACTOR = 1e6
ARC_SAMPLES = 2048


@dataclass(frozen=True)
class HomogeneousProblem:
    mu: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not (1.0 <= self.alpha < 2.0):
            raise ValueError("alpha must lie in [1, 2)")

    @property
    def c_max(self) -> float:
        """Supremum of ``|c|`` for arcs joining two points of the unit circle."""
        return float(np.sqrt(2 * self.mu / self.alpha))

    def potential(self, r):
        return self.mu / (self.alpha * np.asarray(r, dtype=float) ** self.alpha)


@dataclass
class KeplerArc:
    problem: HomogeneousProblem
    angular_momentum: float
    t: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    rdot: np.ndarray
    thetadot: np.ndarray
    rho_star_attained: float
    rotation_index: int | None = None
    pericentre_time: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def xy(self) -> np.ndarray:
        return np.stack([self.r * np.cos(self.theta), self.r * np.sin(self.theta)], axis=1)

    @property
    def velocity(self) -> np.ndarray:
        c, s = np.cos(self.theta), np.sin(self.theta)
        vx = self.rdot * c - self.r * self.thetadot * s
        vy = self.rdot * s + self.r * self.thetadot * c
        return np.stack([vx, vy], axis=1)

    @property
    def energy_residual(self) -> np.ndarray:
        kin = 0.5 * (self.rdot**2 + (self.r * self.thetadot) ** 2)
        return kin - self.problem.potential(self.r)

    @property
    def angmom_residual(self) -> np.ndarray:
        return self.r**2 * self.thetadot - self.angular_momentum

    def to_csv(self, path) -> None:
        xy = self.xy
        cols = np.column_stack(
            [self.t, self.r, self.theta, xy[:, 0], xy[:, 1], self.energy_residual, self.angmom_residual]
        )
        header = "t,r,theta,x,y,energy_residual,angmom_residual"
        np.savetxt(path, cols, delimiter=",", header=header, comments="", fmt="%.17g")


# ---------------------------------------------------------------------------
# closed forms


def gamma_const(alpha: float, mu: float) -> float:
    """Prefactor of the rectilinear arc ``r(t) = gamma |t - t0|^(2/(2+alpha))``."""
    return float((np.sqrt(mu / (2 * alpha)) * (2 + alpha)) ** (2 / (2 + alpha)))


def entire_span_closed(alpha: float) -> float:
    return 2 * np.pi / (2 - alpha)


def closed_form_theta(problem: HomogeneousProblem, c: float) -> float:
    """Oracle for the unit-endpoint angle, ``4/(2-a) arccos(|c| sqrt(a/2mu))``."""
    a, mu = problem.alpha, problem.mu
    return float(np.sign(c) * 4 / (2 - a) * np.arccos(min(1.0, abs(c) * np.sqrt(a / (2 * mu)))))


def closed_form_orbit(problem: HomogeneousProblem, c: float, phi) -> np.ndarray:
    """Oracle orbit ``r(phi) = r_peri / cos((2-a) phi / 2)^(2/(2-a))``."""
    a = problem.alpha
    rp = rho_star(problem, c)
    return rp / np.cos((2 - a) * np.asarray(phi) / 2) ** (2 / (2 - a))


def action_bound(problem: HomogeneousProblem) -> float:
    return float(np.sqrt(2 * problem.mu / problem.alpha) * 4 / (2 - problem.alpha))


def closed_form_action(problem: HomogeneousProblem, c: float) -> float:
    """Oracle for the unit-endpoint action, ``bound * sqrt(1 - a c^2 / 2mu)``."""
    return float(action_bound(problem) * np.sqrt(max(0.0, 1 - problem.alpha * c * c / (2 * problem.mu))))


def index_counters(alpha: float) -> tuple[int, int]:
    """``i = max{k >= 1 : k < 2/(2-a)}`` and ``i* = max{k >= 0 : k < 1/(2-a)}``."""
    if not (1.0 <= alpha < 2.0):
        raise ValueError("alpha must lie in [1, 2)")
    def largest_below(num):
        # largest k with k (2 - a) < num, robust to 2/(2-a) landing just above an integer
        k = int(np.floor(num / (2 - alpha)))
        while k * (2 - alpha) >= num * (1 - 1e-12):
            k -= 1
        return k

    return max(largest_below(2.0), 1), max(largest_below(1.0), 0)


# ---------------------------------------------------------------------------
# radial phase plane


def rho_star(problem: HomogeneousProblem, c: float = 1.0, unit_endpoints: bool = False) -> float:
    """Pericentre radius of the zero-energy arc with angular momentum ``c``.

    For ``c = 1`` this is the rescaled ``(alpha/2mu)^(1/(2-alpha))``.
    """
    a, mu = problem.alpha, problem.mu
    if c == 0:
        raise DegenerateRectilinear("rectilinear arcs have no pericentre")
    if unit_endpoints and c * c >= 2 * mu / a:
        raise NoSolution("c^2 >= 2 mu / alpha: pericentre outside the unit circle")
    return float((a * c * c / (2 * mu)) ** (1 / (2 - a)))


def radial_F(problem: HomogeneousProblem, rho, c: float = 1.0):
    """Effective radial function with ``rho'^2/2 + F(rho) = 0`` on zero-energy arcs."""
    rho = np.asarray(rho, dtype=float)
    return c * c / (2 * rho**2) - problem.mu / (problem.alpha * rho**problem.alpha)


def _minus2F_over_eta2(problem, c, rp, eta):
    """``-2F(rp + eta^2) / eta^2`` evaluated without cancellation."""
    a = problem.alpha
    eta = np.asarray(eta, dtype=float)
    z = eta**2 / rp
    small = z < 1e-12
    zs = np.where(small, 1.0, z)
    L = np.where(small, 1 - z / 2, np.log1p(zs) / zs)
    q = (2 - a) * z * L
    qs = np.where(q < 1e-12, 1.0, q)
    E = np.where(q < 1e-12, 1 + q / 2, np.expm1(qs) / qs)
    r = rp + eta**2
    return c * c / r**2 * (2 - a) * L * E / rp


def _panel_gl(f, a, b):
    x = 0.5 * (b - a) * _GL_X + 0.5 * (b + a)
    return 0.5 * (b - a) * np.dot(_GL_W, f(x))


def _adaptive(f, a, b, rtol=1e-14, depth=0):
    whole = _panel_gl(f, a, b)
    m = 0.5 * (a + b)
    left, right = _panel_gl(f, a, m), _panel_gl(f, m, b)
    if abs(left + right - whole) <= rtol * max(abs(left + right), 1e-300) or depth > 30:
        return left + right
    return _adaptive(f, a, m, rtol, depth + 1) + _adaptive(f, m, b, rtol, depth + 1)


def _eta_integral(f, eta_max, rp):
    """Integrate ``f(eta)`` over ``[0, eta_max]`` on geometric panels scaled by ``sqrt(rp)``."""
    if eta_max <= 0:
        return 0.0
    s = np.sqrt(rp)
    edges = [0.0]
    e = min(s, eta_max)
    edges.append(e)
    while e < eta_max:
        e = min(2 * e, eta_max)
        edges.append(e)
    return float(sum(_adaptive(f, lo, hi) for lo, hi in zip(edges[:-1], edges[1:])))


def _time_integrand(problem, c, rp):
    # dt = dr / sqrt(-2F) = 2 eta d eta / (eta sqrt(g)) = 2 d eta / sqrt(g)
    return lambda eta: 2.0 / np.sqrt(_minus2F_over_eta2(problem, c, rp, eta))


def _angle_integrand(problem, c, rp):
    # d theta = c / r^2 dt
    return lambda eta: 2.0 * abs(c) / (rp + eta**2) ** 2 / np.sqrt(_minus2F_over_eta2(problem, c, rp, eta))


def time_to_radius(problem: HomogeneousProblem, c: float, R_target: float) -> float:
    """Time from pericentre to ``R_target`` on the rescaled unit-momentum arc.

    ``c`` only fixes the admissible range; the rescaled arc itself is
    independent of it.
    """
    if c == 0:
        raise DegenerateRectilinear("c must be nonzero")
    if c * c >= 2 * problem.mu / problem.alpha:
        raise NoSolution("c^2 >= 2 mu / alpha")
    rp = rho_star(problem, 1.0)
    if R_target < rp:
        raise DomainError("target radius below the pericentre")
    return physical_time_to_radius(problem, 1.0, R_target)


def physical_time_to_radius(problem: HomogeneousProblem, c: float, R_target: float) -> float:
    rp = rho_star(problem, c)
    if R_target < rp * (1 - 1e-15):
        raise DomainError("target radius below the pericentre")
    eta_max = np.sqrt(max(R_target - rp, 0.0))
    return _eta_integral(_time_integrand(problem, c, rp), eta_max, rp)


def angle_to_radius(problem: HomogeneousProblem, c: float, R_target: float) -> float:
    """Unsigned angle swept between the pericentre and radius ``R_target``."""
    rp = rho_star(problem, c)
    if R_target < rp * (1 - 1e-15):
        raise DomainError("target radius below the pericentre")
    eta_max = np.sqrt(max(R_target - rp, 0.0))
    return _eta_integral(_angle_integrand(problem, c, rp), eta_max, rp)


def angle_tail(problem: HomogeneousProblem, c: float, r_max: float) -> float:
    """Angle swept from ``r_max`` to infinity, by quadrature after ``r = r_max w^(-2/(2-a))``."""
    a = problem.alpha
    p = 2 / (2 - a)

    def f(w):
        w = np.asarray(w, dtype=float)
        r = r_max * w ** (-p)
        g = 2 * problem.mu / (a * r**a) - c * c / r**2
        # d theta/dr * dr/dw with the w-powers combined analytically
        # r^-2 * p r_max w^(-p-1) / sqrt(g); g ~ r^-a so the product is O(1) as w -> 0
        rg = np.sqrt(2 * problem.mu / a - c * c * r ** (a - 2))
        return abs(c) * p * r_max ** (a / 2 - 1) / rg

    # r^(a/2-2) * r_max w^(-p-1) = r_max^(a/2-1) w^(-p(a/2-2) - p - 1) = r_max^(a/2-1) w^0
    return float(_adaptive(f, 0.0, 1.0))


def theta_span(problem: HomogeneousProblem, c: float) -> float:
    """Signed angle swept by the arc with angular momentum ``c`` between unit radii."""
    if c == 0:
        raise DegenerateRectilinear("c = 0 is the rectilinear case")
    if c * c >= 2 * problem.mu / problem.alpha:
        return 0.0
    return float(np.sign(c) * 2 * angle_to_radius(problem, abs(c), 1.0))


def entire_span(problem: HomogeneousProblem, c: float = 1.0, r_max_factor: float = R_MAX_FACTOR) -> float:
    """Total angle swept by an entire zero-energy arc, quadrature plus tail."""
    if c == 0:
        raise DegenerateRectilinear("rectilinear arcs have no span")
    rp = rho_star(problem, abs(c))
    r_max = r_max_factor * rp
    return float(2 * (angle_to_radius(problem, abs(c), r_max) + angle_tail(problem, abs(c), r_max)))


# ---------------------------------------------------------------------------
# arcs


def _polar_rhs(problem, c):
    a, mu = problem.alpha, problem.mu

    def rhs(t, y):
        r, th, v = y
        return [v, c / r**2, c * c / r**3 - mu / r ** (a + 1)]

    return rhs


def _integrate_arc(problem, c, half_time, n_samples, theta_peri=0.0):
    """Integrate ``(eta, theta)`` from the pericentre, sampled symmetrically in time.

    ``eta' = sqrt(g)/2`` and ``theta' = c/r^2`` stay regular at the
    pericentre however small it is, unlike the Cartesian equations.
    """
    rp = rho_star(problem, c)
    ac = abs(c)
    n_half = n_samples // 2
    ts = np.linspace(0.0, half_time, n_half + 1)

    def rhs(t, y):
        r = rp + y[0] ** 2
        return [0.5 * np.sqrt(_minus2F_over_eta2(problem, ac, rp, y[0])), ac / r**2]

    sol = solve_ivp(
        rhs, (0.0, half_time), [0.0, 0.0], method="DOP853", t_eval=ts, rtol=1e-13, atol=[1e-16 * np.sqrt(rp), 1e-15]
    )
    if not sol.success:
        raise NumericalError(sol.message)
    eta, th = sol.y
    r = rp + eta**2
    rdot = eta * np.sqrt(_minus2F_over_eta2(problem, ac, rp, eta))
    th = np.sign(c) * th
    thdot = c / r**2
    # mirror: r even, theta odd about the pericentre
    t = np.concatenate([-ts[:0:-1], ts])
    r = np.concatenate([r[:0:-1], r])
    th = np.concatenate([-th[:0:-1], th]) + theta_peri
    rdot = np.concatenate([-rdot[:0:-1], rdot])
    thdot = np.concatenate([thdot[:0:-1], thdot])
    return t, r, th, rdot, thdot, rp


def rectilinear_arc(
    problem: HomogeneousProblem,
    t0: float,
    direction,
    branch: str = "future",
    domain: tuple[float, float] | None = None,
    n_samples: int = ARC_SAMPLES,
) -> KeplerArc:
    """Collision-ejection (future) or collision-arrival (past) arc with ``c = 0``."""
    d = np.asarray(direction, dtype=float)
    if d.shape != (2,) or abs(np.linalg.norm(d) - 1) > 1e-12:
        raise ValueError("direction must be a unit 2-vector")
    if branch not in ("future", "past"):
        raise ValueError("branch must be 'future' or 'past'")
    if domain is None:
        domain = (t0, t0 + 1.0) if branch == "future" else (t0 - 1.0, t0)
    lo, hi = domain
    if lo < t0 < hi or (branch == "future" and lo < t0) or (branch == "past" and hi > t0):
        raise DomainError("no entire rectilinear parabolic arc: the domain must not cross t0")
    g = gamma_const(problem.alpha, problem.mu)
    p = 2 / (2 + problem.alpha)
    t = np.linspace(lo, hi, n_samples)
    s = np.abs(t - t0)
    r = g * s**p
    with np.errstate(divide="ignore", invalid="ignore"):
        rdot = np.sign(t - t0) * g * p * s ** (p - 1)
    theta = np.full_like(t, np.arctan2(d[1], d[0]))
    return KeplerArc(problem, 0.0, t, r, theta, rdot, np.zeros_like(t), 0.0, 0, t0)


def entire_arc(problem: HomogeneousProblem, c: float, half_time: float, n_samples: int = ARC_SAMPLES):
    """Arc with pericentre at ``t = 0`` on ``[-half_time, half_time]``."""
    t, r, th, rdot, thdot, rp = _integrate_arc(problem, c, half_time, n_samples)
    return KeplerArc(problem, c, t, r, th, rdot, thdot, rp, None, 0.0)


def _bisect_c(problem, target, lo, hi, c_tol=1e-12, theta_tol=1e-10):
    """Bisection for ``theta_span(c) = target`` on ``(lo, hi)``; ``theta_span`` decreases."""
    f_lo = theta_span(problem, lo) - target if lo > 0 else np.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = theta_span(problem, mid) - target
        if abs(val) < theta_tol * 1e-2 or hi - lo < c_tol:
            return mid
        if val > 0:
            lo, f_lo = mid, val
        else:
            hi = mid
    return 0.5 * (lo + hi)


def shoot(
    problem: HomogeneousProblem,
    theta1: float,
    theta2: float,
    l: int,
    n_samples: int = ARC_SAMPLES,
    bracket: tuple[float, float] | None = None,
) -> KeplerArc:
    """Parabolic arc from ``e^{i theta1}`` to ``e^{i theta2}`` with rotation index ``l``."""
    target = theta2 - theta1 + 2 * np.pi * l
    if abs(target) < 1e-14:
        raise DegenerateEndpoints("target angle is zero")
    span_sup = entire_span(problem)
    if abs(target) >= span_sup:
        raise NoSolutionInClass(
            f"|target| = {abs(target):.6g} is not below the entire span {span_sup:.6g}"
        )
    lo, hi = bracket if bracket is not None else (0.0, problem.c_max)
    c_abs = _bisect_c(problem, abs(target), lo, hi)
    c = float(np.sign(target) * c_abs)
    half = physical_time_to_radius(problem, c_abs, 1.0)
    t, r, th, rdot, thdot, rp = _integrate_arc(problem, c, half, n_samples)
    # rotate so that the arc starts at theta1
    th = th - th[0] + theta1
    arc = KeplerArc(problem, c, t, r, th, rdot, thdot, rp, int(l), 0.0)
    arc.meta.update(target=target, theta_span=theta_span(problem, c))
    return arc


def action_to_radius(problem: HomogeneousProblem, c: float, R_target: float) -> float:
    """``int (|x'|^2/2 + V) dt = int 2V dt`` from the pericentre out to ``R_target``."""
    if c == 0:
        raise DegenerateRectilinear("use the closed form for rectilinear arcs")
    rp = rho_star(problem, abs(c))
    if R_target < rp * (1 - 1e-15):
        raise DomainError("target radius below the pericentre")
    dt = _time_integrand(problem, abs(c), rp)
    f = lambda eta: 2 * problem.potential(rp + eta**2) * dt(eta)  # noqa: E731
    return _eta_integral(f, np.sqrt(max(R_target - rp, 0.0)), rp)


def action_by_samples(arc: KeplerArc) -> float:
    """Composite Simpson quadrature of the Lagrangian over the stored samples."""
    from scipy.integrate import simpson

    lag = 0.5 * (arc.rdot**2 + (arc.r * arc.thetadot) ** 2) + arc.problem.potential(arc.r)
    return float(simpson(lag, x=arc.t))


def action_of_arc(arc: KeplerArc) -> float:
    """Action of a sampled arc.

    Arcs through their pericentre are integrated in ``eta`` branch by branch,
    which stays accurate when the pericentre is tiny and the samples do not
    resolve it; other arcs fall back to the sampled quadrature.
    """
    c = arc.angular_momentum
    if c != 0 and arc.t[0] <= arc.pericentre_time <= arc.t[-1]:
        return action_to_radius(arc.problem, c, arc.r[0]) + action_to_radius(arc.problem, c, arc.r[-1])
    return action_by_samples(arc)


# ---------------------------------------------------------------------------
# geometry of the entire arc


def entire_arc_polyline(problem: HomogeneousProblem, n: int = 4000, r_max_factor: float = 1e6) -> np.ndarray:
    """Both branches of the entire ``c = 1`` arc as a planar polyline, by quadrature."""
    rp = rho_star(problem, 1.0)
    etas = np.concatenate([[0.0], np.sqrt(rp) * np.geomspace(1e-3, np.sqrt(r_max_factor), n // 2)])
    f = _angle_integrand(problem, 1.0, rp)
    x16, w16 = np.polynomial.legendre.leggauss(16)
    pieces = []
    for lo, hi in zip(etas[:-1], etas[1:]):
        x = 0.5 * (hi - lo) * x16 + 0.5 * (hi + lo)
        pieces.append(0.5 * (hi - lo) * np.dot(w16, f(x)))
    phi = np.concatenate([[0.0], np.cumsum(pieces)])
    r = rp + etas**2
    phi_all = np.concatenate([-phi[:0:-1], phi])
    r_all = np.concatenate([r[:0:-1], r])
    return np.stack([r_all * np.cos(phi_all), r_all * np.sin(phi_all)], axis=1)


def count_self_intersections(poly: np.ndarray, chunk: int = 512) -> int:
    """Number of proper crossings between non-adjacent segments of a planar polyline."""
    p, q = poly[:-1], poly[1:]
    nseg = len(p)
    total = 0

    def orient(a, b, c):
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])

    for s in range(0, nseg, chunk):
        a, b = p[s : s + chunk, None], q[s : s + chunk, None]
        c, d = p[None], q[None]
        o1, o2 = orient(a, b, c), orient(a, b, d)
        o3, o4 = orient(c, d, a), orient(c, d, b)
        hit = (o1 * o2 < 0) & (o3 * o4 < 0)
        i = np.arange(s, min(s + chunk, nseg))[:, None]
        j = np.arange(nseg)[None]
        total += int(np.sum(hit & (j > i + 1)))
    return total


# ---------------------------------------------------------------------------
# perpendicular second variation


def _entire_radius(problem, c, times):
    """``r(t)`` of the entire arc with pericentre at ``t = 0`` for ``t >= 0``."""
    rp = rho_star(problem, c)

    def rhs(t, y):
        eta = y[0]
        g = _minus2F_over_eta2(problem, c, rp, eta)
        return [0.5 * np.sqrt(g)]

    uniq, inv = np.unique(np.asarray(times, dtype=float), return_inverse=True)
    sol = solve_ivp(rhs, (0.0, float(uniq[-1])), [0.0], method="DOP853", t_eval=uniq, rtol=1e-11, atol=1e-13)
    if not sol.success:
        raise NumericalError(sol.message)
    return (rp + sol.y[0] ** 2)[inv]


def perpendicular_index(problem: HomogeneousProblem, L: float, n_nodes: int = 4096) -> int:
    """Negative-eigenvalue count of ``int phi'^2 - mu |v|^(-a-2) phi^2`` on ``(-L, L)``.

    ``v`` is the entire arc with pericentre radius 1 and the form is
    discretized by linear elements on a sinh-stretched mesh with lumped mass.
    """
    if not L > 0:
        raise ValueError("L must be positive")
    a, mu = problem.alpha, problem.mu
    c = np.sqrt(2 * mu / a)  # pericentre radius 1
    s = np.linspace(-1.0, 1.0, n_nodes + 2)
    k = np.arcsinh(L)
    t = L * np.sinh(k * s) / np.sinh(k) if L > 1 else L * s
    half = np.abs(t)
    r = _entire_radius(problem, c, half)
    h = np.diff(t)
    q = mu / r ** (a + 2)
    w = 0.5 * (h[:-1] + h[1:])
    d = 1 / h[:-1] + 1 / h[1:] - w * q[1:-1]
    e = -1 / h[1:-1]
    try:
        ev = eigvalsh_tridiagonal(d, e, select="v", select_range=(-np.inf, 0.0))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(str(exc)) from exc
    return int(len(ev))


def perpendicular_index_search(
    problem: HomogeneousProblem, target: int | None = None, L_cap: float = 1e3, n_nodes: int = 4096
) -> tuple[int, float]:
    """Increase ``L`` geometrically until the index reaches ``target`` or ``L_cap``."""
    target = index_counters(problem.alpha)[0] if target is None else target
    L, idx = 1.0, 0
    while True:
        idx = perpendicular_index(problem, L, n_nodes)
        if idx >= target or L >= L_cap:
            return idx, L
        L = min(L * 2, L_cap)
