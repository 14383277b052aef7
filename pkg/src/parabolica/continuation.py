"""Fixed-endpoint solutions at growing radius and the checks made on them.

``solve_at_R`` produces a collision-free zero-energy trajectory from
``R xi_minus`` to ``R xi_plus`` (beta continuation of a min-max critical
point, then multiple-shooting polish).  ``run_schedule`` repeats it over an
increasing list of radii and checks that minimal radius, centre distances
and the time spent inside the ball of radius K stay bounded, and that the
time-centred trajectories settle on a fixed window.  ``asymptotic_fit``,
``diagnostics`` and ``level_scaling`` are report-only analyses.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from . import kepler
from . import pathspace as ps
from . import potential as pot
from . import solver as sv
from .errors import DegenerateDirections, HypothesisViolation, InsufficientTail, NotConverged

log = logging.getLogger(__name__)

BOUNDEDNESS_FACTOR = 1.1
CAUCHY_WINDOW = (-1.0, 1.0)


# ---------------------------------------------------------------------------
# records


@dataclass
class ContinuationRecord:
    R: float
    trajectory: ps.TrueTimeTrajectory  # time-centred
    omega_R: float
    min_radius: float
    min_centre_distances: list
    t_minus: float  # crossings of |x| = K, before the time shift
    t_plus: float
    time_shift: float
    action: float
    morse_index: int
    K: float
    energy_residual: float = float("nan")
    boundary_error: float = float("nan")
    maupertuis_value: float = float("nan")
    n_nodes: int = 0
    runtime: float = 0.0
    critical_point: sv.CriticalPoint | None = field(default=None, repr=False)

    @property
    def Delta_R(self) -> float:
        return 0.5 * (self.t_plus - self.t_minus)

    @property
    def shifted_crossings(self) -> tuple[float, float]:
        return self.t_minus - self.time_shift, self.t_plus - self.time_shift

    def summary(self) -> dict:
        return {
            "R": self.R,
            "omega_R": self.omega_R,
            "action": self.action,
            "maupertuis_value": self.maupertuis_value,
            "morse_index": self.morse_index,
            "min_radius": self.min_radius,
            "min_centre_distances": list(map(float, self.min_centre_distances)),
            "t_minus": self.t_minus,
            "t_plus": self.t_plus,
            "Delta_R": self.Delta_R,
            "energy_residual": self.energy_residual,
            "boundary_error": self.boundary_error,
            "n_nodes": self.n_nodes,
        }


@dataclass
class AsymptoticFit:
    exponent: float
    prefactor: float
    residual: float
    window: tuple[float, float]
    direction: np.ndarray | None = None
    s_variation: float = float("nan")
    side: str = "+"


# ---------------------------------------------------------------------------
# solving at one radius


def node_count(R: float, K: float, base: int = 256) -> int:
    return base * math.ceil(math.sqrt(R / (10 * K)))


def time_grid(config, R: float, n: int, core_time: float = 1.0) -> np.ndarray:
    """Parameter grid on [-1, 1] refined near 0 to match the expected time scale.

    The time scale is estimated from the parabolic law ``r = gamma t^(2/(2+alpha))``
    with the total mass; ``core_time`` is the physical time resolved uniformly
    around the passage.
    """
    a = config.alpha
    omega_est = (R / kepler.gamma_const(a, config.total_mass)) ** ((2 + a) / 2)
    return ps.stretched_times(n, math.asinh(omega_est / core_time))


def crossing_times(traj: ps.TrueTimeTrajectory, K: float) -> tuple[float, float]:
    """First inward and last outward crossing of ``|x| = K`` (bisection on the Hermite interpolant)."""
    r = traj.radius
    inside = np.nonzero(r <= K)[0]
    if len(inside) == 0:
        k = int(np.argmin(r))
        return float(traj.t[k]), float(traj.t[k])
    spl = CubicHermiteSpline(traj.t, traj.x, traj.v, axis=0)
    g = lambda s: float(np.linalg.norm(spl(s)) - K)  # noqa: E731
    i, j = inside[0], inside[-1]
    t_minus = float(traj.t[0]) if i == 0 else brentq(g, traj.t[i - 1], traj.t[i], xtol=1e-13)
    t_plus = float(traj.t[-1]) if j == len(r) - 1 else brentq(g, traj.t[j], traj.t[j + 1], xtol=1e-13)
    return t_minus, t_plus


def _check_directions(xi_plus, xi_minus):
    xp, xm = np.asarray(xi_plus, float), np.asarray(xi_minus, float)
    for v in (xp, xm):
        if abs(np.linalg.norm(v) - 1) > 1e-12:
            raise ValueError("directions must be unit vectors")
    if np.linalg.norm(xp - xm) < 1e-12:
        raise DegenerateDirections("incoming and outgoing directions coincide")
    return xp, xm


def make_record(R, cp: sv.CriticalPoint, config, K, polish: sv.PolishResult, runtime=0.0) -> ContinuationRecord:
    traj = polish.trajectory
    t_minus, t_plus = crossing_times(traj, K)
    shift = 0.5 * (t_minus + t_plus)
    centred = traj.shifted(shift)
    d = np.linalg.norm(traj.x[:, None, :] - config.positions[None], axis=-1).min(axis=0)
    return ContinuationRecord(
        R=float(R),
        trajectory=centred,
        omega_R=polish.omega,
        min_radius=float(traj.radius.min()),
        min_centre_distances=[float(v) for v in d],
        t_minus=t_minus,
        t_plus=t_plus,
        time_shift=shift,
        action=ps.action_value(traj, config),
        morse_index=cp.morse_index,
        K=float(K),
        energy_residual=polish.energy_residual,
        boundary_error=polish.boundary_error,
        maupertuis_value=cp.value,
        n_nodes=cp.path.n,
        runtime=runtime,
        critical_point=cp,
    )


def solve_at_R(
    config,
    xi_plus,
    xi_minus,
    R: float,
    options: sv.SolverOptions = sv.SolverOptions(),
    constants: pot.PotentialConstants | None = None,
    centres=(0, 1),
    n_nodes: int | None = None,
    warm: ContinuationRecord | None = None,
) -> ContinuationRecord:
    """Index-at-most-one zero-energy trajectory from ``R xi_minus`` to ``R xi_plus``.

    With ``warm`` given, the previous critical path is stretched to the new
    endpoints and refined at ``beta = 0`` directly; if that fails to give a
    collision-free index-at-most-one point the cold path (loop relaxation and
    beta continuation) is taken.
    """
    t0 = time.perf_counter()
    xp, xm = _check_directions(xi_plus, xi_minus)
    constants = constants or pot.certify_constants(config)
    K = constants.K
    if R <= K:
        raise ValueError(f"R = {R} must exceed K = {K:.6g}")
    n = n_nodes or node_count(R, K, options.n_nodes)
    times = time_grid(config, R, n)
    q_minus, q_plus = R * xm, R * xp
    cp = None
    if warm is not None and warm.critical_point is not None:
        try:
            cp = _warm_solve(warm, config, q_minus, q_plus, times, options)
        except (NotConverged, sv.IndexViolation, sv.CollisionPath, sv.CollisionEvaluation) as err:
            log.info("warm start at R=%g failed (%s); solving cold", R, err)
            cp = None
    if cp is None:
        loop = sv.initial_loop(config, q_minus, q_plus, times, centres[0], centres[1], options.loop_size)
        points = sv.beta_continuation(loop, config, options=options, delta_star=constants.delta_star, centres=centres)
        cp = points[-1]
        cp.history["beta_values"] = [p.value for p in points]
        cp.history["beta_distances"] = [p.min_centre_distance for p in points]
        cp.history["beta_omegas"] = [p.omega for p in points]
    polish = sv.polish_trajectory(cp.path, config)
    return make_record(R, cp, config, K, polish, time.perf_counter() - t0)


def stretch_path(path: ps.DiscretePath, q_minus, q_plus, times, alpha: float) -> ps.DiscretePath:
    """Carry a critical path to new endpoints and a new grid.

    The old path is resampled in its own parameter; its two outer arms are
    then continued radially with the parabolic profile so that the ends land
    on the new endpoints.
    """
    from scipy.interpolate import CubicSpline

    old = CubicSpline(path.times, path.nodes, axis=0)
    p = 2 / (2 + alpha)
    r_old = np.linalg.norm(path.nodes, axis=1)
    R_old = 0.5 * (r_old[0] + r_old[-1])
    R_new = 0.5 * (np.linalg.norm(q_minus) + np.linalg.norm(q_plus))
    # parameter values of the new grid in the old time scale
    scale = (R_new / R_old) ** (1 / p)
    s_old = np.clip(times * scale, -1, 1)
    nodes = old(s_old)
    out = np.abs(times * scale) > 1
    for sign, q in ((-1, q_minus), (1, q_plus)):
        sel = out & (np.sign(times) == sign)
        if not np.any(sel):
            continue
        end = path.nodes[0] if sign < 0 else path.nodes[-1]
        f = ((np.abs(times[sel]) * scale) ** p - 1) / (scale**p - 1)
        nodes[sel] = end + f[:, None] * (q - end)
    nodes[0], nodes[-1] = q_minus, q_plus
    return ps.DiscretePath(nodes, times)


WARM_RATIO = 1.25


def _warm_solve(warm: ContinuationRecord, config, q_minus, q_plus, times, options) -> sv.CriticalPoint:
    """Refine the stretched previous critical path at ``beta = 0``.

    The direct stretch is tried first; when Newton stalls the radius is
    approached in geometric sub-steps of ratio at most ``WARM_RATIO``.
    """
    mod = ps.StrongForceModifier(0.0)
    R = 0.5 * (np.linalg.norm(q_minus) + np.linalg.norm(q_plus))
    xm, xp = q_minus / np.linalg.norm(q_minus), q_plus / np.linalg.norm(q_plus)
    path, rg, its = sv.warm_refine(stretch_path(warm.critical_point.path, q_minus, q_plus, times, config.alpha),
                                   mod, config, options)
    steps = 1
    if rg >= options.tol_grad:
        m = max(2, int(np.ceil(np.log(R / warm.R) / np.log(WARM_RATIO))))
        path, its = warm.critical_point.path, 0
        for Rk in warm.R * (R / warm.R) ** (np.arange(1, m + 1) / m):
            tk = times if Rk == R else time_grid(config, Rk, len(times) - 1)
            path, rg, k = sv.warm_refine(stretch_path(path, Rk * xm, Rk * xp, tk, config.alpha), mod, config, options)
            its += k
            if rg >= options.tol_grad:
                raise NotConverged(f"warm refinement stalled at R={Rk:.6g} (relative gradient {rg:.2e})", best=path)
        steps = m
    cp = sv._make_point(path, mod, config, options, its, {"warm_from": warm.R, "warm_steps": steps})
    if cp.morse_index > 1:
        cp = sv.reduce_index(cp, mod, config, options)
    if cp.morse_index > 1:
        raise sv.IndexViolation("warm start reached index above one", point=cp)
    if cp.min_centre_distance < options.collision_threshold:
        raise sv.CollisionPath("warm start reached the collision set")
    return cp


# ---------------------------------------------------------------------------
# schedules


def bounded(series, factor: float = BOUNDEDNESS_FACTOR) -> bool:
    """Desk-scale surrogate for a finite limsup: last value at most ``factor`` times the median."""
    s = np.asarray(series, float)
    return bool(s[-1] <= factor * np.median(s))


def cauchy_distances(records, window=CAUCHY_WINDOW, samples: int = 201) -> list[float]:
    """Sup distance on ``window`` between consecutive time-centred trajectories."""
    t = np.linspace(*window, samples)
    out = []
    for a, b in zip(records, records[1:]):
        xa = a.trajectory.interpolator()(t)
        xb = b.trajectory.interpolator()(t)
        out.append(float(np.max(np.linalg.norm(xa - xb, axis=1))))
    return out


@dataclass
class HypothesisReport:
    R: list
    min_radius: list
    min_centre_distances: list
    crossing_spread: list
    cauchy: list
    cauchy_ratios: list
    omega_minus_t_plus: list
    checks: dict

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def series(self) -> dict:
        return {
            "R": self.R,
            "min_radius": self.min_radius,
            "min_centre_distances": self.min_centre_distances,
            "t_plus_minus_t_minus": self.crossing_spread,
            "cauchy": self.cauchy,
            "cauchy_ratios": self.cauchy_ratios,
            "omega_minus_t_plus": self.omega_minus_t_plus,
        }


def hypothesis_report(records, factor: float = BOUNDEDNESS_FACTOR) -> HypothesisReport:
    R = [r.R for r in records]
    mr = [r.min_radius for r in records]
    dist = [min(r.min_centre_distances) for r in records]
    spread = [r.t_plus - r.t_minus for r in records]
    inv_dist = [1 / d for d in dist]
    cauchy = cauchy_distances(records) if len(records) > 1 else []
    ratios = [b / a for a, b in zip(cauchy, cauchy[1:]) if a > 0]
    gap = [r.omega_R - r.t_plus for r in records]
    checks = {
        "min_radius_bounded": bounded(mr, factor),
        "centre_distance_bounded_below": bounded(inv_dist, factor),
        "crossing_spread_bounded": bounded(spread, factor),
        "cauchy_halving": all(q <= 0.5 for q in ratios),
        "omega_gap_growing": all(b > a for a, b in zip(gap, gap[1:])),
    }
    return HypothesisReport(R, mr, dist, spread, cauchy, ratios, gap, checks)


def run_schedule(
    config,
    xi_plus,
    xi_minus,
    R_schedule,
    options: sv.SolverOptions = sv.SolverOptions(),
    constants: pot.PotentialConstants | None = None,
    warm: bool = True,
    raise_on_violation: bool = True,
):
    """Solve along an increasing list of radii; returns ``(records, report)``.

    Raises ``HypothesisViolation`` (with the series attached) when any of the
    checks in ``hypothesis_report`` fails and ``raise_on_violation`` is set.
    """
    Rs = [float(R) for R in R_schedule]
    if any(b <= a for a, b in zip(Rs, Rs[1:])):
        raise ValueError("R schedule must be increasing")
    constants = constants or pot.certify_constants(config)
    records = []
    prev = None
    for R in Rs:
        rec = solve_at_R(config, xi_plus, xi_minus, R, options, constants, warm=prev if warm else None)
        log.info("R=%g action=%.10g index=%d min_dist=%.4g", R, rec.action, rec.morse_index, min(rec.min_centre_distances))
        records.append(rec)
        prev = rec
    report = hypothesis_report(records)
    if raise_on_violation and not report.ok:
        failed = [k for k, v in report.checks.items() if not v]
        raise HypothesisViolation(f"checks failed: {', '.join(failed)}", series=report.series())
    return records, report


# ---------------------------------------------------------------------------
# analyses


def _fit_tail(t, r, lo, hi):
    sel = (r >= lo) & (r <= hi) & (t > 0)
    if sel.sum() < 8:
        raise InsufficientTail(f"only {int(sel.sum())} samples with radius in [{lo:.4g}, {hi:.4g}]")
    A = np.vstack([np.log(t[sel]), np.ones(sel.sum())]).T
    coef, *_ = np.linalg.lstsq(A, np.log(r[sel]), rcond=None)
    res = np.log(r[sel]) - A @ coef
    return float(coef[0]), float(np.exp(coef[1])), float(np.sqrt(np.mean(res**2))), sel


def asymptotic_fit(record, K: float | None = None, side: str = "+", window=None) -> AsymptoticFit:
    """Log-log fit of ``r`` against ``|t|`` on the radius window ``[10 K, 0.8 R]``.

    ``record`` may be a ``ContinuationRecord`` or a bare trajectory (then
    ``K`` is required and the time origin is taken as is).  Also returns the
    direction ``x/|x|`` at the outer end of the window and the total
    variation of the direction over the window.
    """
    traj = record.trajectory if isinstance(record, ContinuationRecord) else record
    K = record.K if K is None else K
    r = traj.radius
    R = float(max(r[0], r[-1]) if window is None else window[1] / 0.8)
    lo, hi = (10 * K, 0.8 * R) if window is None else window
    if lo < 2 * K:
        raise ValueError("fit window must stay outside 2K")
    if hi <= lo:
        raise InsufficientTail(f"window [{lo:.4g}, {hi:.4g}] is empty")
    sgn = 1.0 if side == "+" else -1.0
    t = sgn * traj.t
    exp_, pre, res, sel = _fit_tail(t, r, lo, hi)
    s = traj.x[sel] / r[sel, None]
    order = np.argsort(t[sel])
    s = s[order]
    variation = float(np.sum(np.linalg.norm(np.diff(s, axis=0), axis=1)))
    return AsymptoticFit(exp_, pre, res, (lo, hi), s[-1], variation, side)


@dataclass
class DiagnosticReport:
    lagrange_jacobi: float
    angular_momentum: float
    travel_time: float
    s_variation: float
    details: dict

    @property
    def worst(self) -> float:
        return min(self.lagrange_jacobi, self.angular_momentum, self.travel_time, self.s_variation)

    def ok(self, tol: float = 1e-8) -> bool:
        return self.worst >= -tol


def s_variation_constants(alpha: float, m: float, C_plus: float) -> tuple[float, float, float, float]:
    """Constants ``C1..C4`` of the direction-variation bound on a monotone far-field arc."""
    a = alpha
    c1 = math.sqrt(2 * C_plus)
    c2 = 2 * (1 + a / 2) * C_plus * math.sqrt(2 * C_plus) / ((2 - a) * m)
    c3 = (2 - a) * m / (2 ** ((14 - a) / 8) * a * (1 + a / 2) * math.sqrt(C_plus))
    c4 = 2 ** ((a + 14) / 8) / (2 - a)
    return c1, c2, c3, c4


def s_variation_bound(r_t1, r_tau1, r_tau2, alpha, consts, tau1_exponent=None) -> np.ndarray:
    """Right-hand side of the bound on ``int_{tau2}^{t2} |s'|`` for an arc increasing in ``r``.

    ``tau1_exponent`` is the power of ``r(tau1)`` in the denominator,
    ``3 (alpha + 2) / 4`` by default.
    """
    a = alpha
    c1, c2, c3, c4 = consts
    e = 3 * (a + 2) / 4 if tau1_exponent is None else tau1_exponent
    gap = r_tau1 ** (1 + a / 2) - r_t1 ** (1 + a / 2)
    num = c1 * r_tau1 ** (1 - a / 2) + c2 / gap
    den = c3 * gap / r_tau1**e
    return num / den * c4 / r_tau2 ** ((2 - a) / 4)


def monotone_far_arcs(traj: ps.TrueTimeTrajectory, K: float, min_samples: int = 4):
    """Index ranges of maximal sub-intervals with ``|x| >= K`` on which ``r`` is monotone.

    Returns ``(start, stop, sign)`` with ``sign = +1`` for increasing ``r``.
    """
    r = traj.radius
    rdot = np.einsum("ij,ij->i", traj.x, traj.v) / r
    far = r >= K
    arcs = []
    k = 0
    N = len(r)
    while k < N:
        if not far[k]:
            k += 1
            continue
        j = k
        while j + 1 < N and far[j + 1]:
            j += 1
        # split [k, j] where rdot changes sign
        sgn = np.sign(rdot[k : j + 1])
        nz = np.nonzero(sgn)[0]  # a sample with rdot == 0 stays with the arc before it
        flips = nz[1:][sgn[nz[1:]] * sgn[nz[:-1]] < 0]
        cuts = [k] + [k + int(i) for i in flips] + [j + 1]
        for a, b in zip(cuts, cuts[1:]):
            if b - a >= min_samples:
                s = 1 if r[b - 1] > r[a] else -1
                arcs.append((a, b, s))
        k = j + 1
    return arcs


def diagnostics(record, config, constants: pot.PotentialConstants, pairs: int = 60) -> DiagnosticReport:
    """Worst margins of the far-field inequalities along a solved trajectory.

    Margins are ``rhs - lhs`` of each inequality, evaluated at every sample
    with ``|x| >= K`` (pointwise bounds) or over pairs of samples on each
    monotone far-field arc (interval bounds); a margin below ``-1e-8``
    signals a violation.  ``record`` may be a record or a trajectory.
    """
    traj = record.trajectory if isinstance(record, ContinuationRecord) else record
    K, Cp = constants.K, constants.C_plus
    a, m = config.alpha, config.total_mass
    x, v, t = traj.x, traj.v, traj.t
    r = np.linalg.norm(x, axis=1)
    far = r >= K
    details: dict = {}

    # Lagrange-Jacobi: I'' = 2V + x . grad V
    xf = x[far]
    rf = r[far]
    Idd = 2 * pot.eval_V(config, xf) + np.einsum("ij,ij->i", pot.eval_gradV(config, xf), xf)
    lj = Idd - (2 - a) * m / (2 * a * rf**a)
    lj_margin = float(lj.min()) if len(lj) else np.inf

    # angular momentum derivative: A' = x ^ grad V
    Adot = np.linalg.norm(np.cross(xf, pot.eval_gradV(config, xf)), axis=1)
    am = Cp / rf ** (a + 2) - Adot
    am_margin = float(am.min()) if len(am) else np.inf

    arcs = monotone_far_arcs(traj, K)
    details["arcs"] = [(float(t[i]), float(t[j - 1]), s) for i, j, s in arcs]
    tt_margin = np.inf
    sv_margin = np.inf
    sv_sharp = np.inf
    consts = s_variation_constants(a, m, Cp)
    sdot = np.linalg.norm(np.cross(x, v), axis=1) / r**2
    lo_coef = 1 / ((1 + a / 2) * math.sqrt(2 * Cp))
    hi_coef = math.sqrt(2 * a / ((2 - a) * m))
    for i, j, sgn in arcs:
        idx = np.unique(np.linspace(i, j - 1, min(pairs, j - i)).round().astype(int))
        T1, T2 = np.meshgrid(idx, idx, indexing="ij")
        sel = T2 > T1
        k1, k2 = T1[sel], T2[sel]
        dt = t[k2] - t[k1]
        p = 1 + a / 2
        lower = lo_coef * np.abs(r[k2] ** p - r[k1] ** p)
        upper = hi_coef * np.maximum(r[k1], r[k2]) ** p
        tt_margin = min(tt_margin, float(np.min(dt - lower)), float(np.min(upper - dt)))
        # direction variation, written for increasing r (reverse time otherwise)
        seg = np.arange(i, j)
        if sgn < 0:
            seg = seg[::-1]
        ts = sgn * t[seg]
        rs = r[seg]
        sd = sdot[seg]
        # tail integrals int_{tau2}^{t2} |s'|
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (sd[1:] + sd[:-1]) * np.diff(ts))])
        tail = cum[-1] - cum
        pos = np.unique(np.linspace(1, len(seg) - 1, min(pairs, len(seg) - 1)).round().astype(int))
        P1, P2 = np.meshgrid(pos, pos, indexing="ij")
        ok = P2 >= P1
        q1, q2 = P1[ok], P2[ok]
        bound = s_variation_bound(rs[0], rs[q1], rs[q2], a, consts)
        sharp = s_variation_bound(rs[0], rs[q1], rs[q2], a, consts, tau1_exponent=(3 * a + 2) / 4)
        sv_margin = min(sv_margin, float(np.min(bound - tail[q2])))
        sv_sharp = min(sv_sharp, float(np.min(sharp - tail[q2])))
    details["s_variation_sharp_exponent"] = sv_sharp
    details["far_samples"] = int(far.sum())
    return DiagnosticReport(lj_margin, am_margin, float(tt_margin), float(sv_margin), details)


def level_scaling(records, config, growth_tol: float = 1e-9) -> dict:
    """Fit ``A(R) = slope R^(1 - alpha/2) + offset`` and compare the slope with theory.

    The offset band is ``max |A - slope_theory R^(1 - alpha/2)|``; it is
    reported per radius so that growth can be judged.
    """
    a, m = config.alpha, config.total_mass
    theory = math.sqrt(2 * m / a) * 4 / (2 - a)
    R = np.array([r.R for r in records], float)
    A = np.array([r.action for r in records], float)
    if len(np.unique(R)) < 3:
        log.warning("level scaling needs at least three distinct radii, got %d", len(np.unique(R)))
        return {"skipped": True, "theory_slope": theory, "R": R.tolist(), "action": A.tolist()}
    X = R ** (1 - a / 2)
    slope, offset = np.polyfit(X, A, 1)
    offsets = A - theory * X
    band = np.abs(offsets)
    non_growing = bool(np.all(np.diff(band) <= growth_tol * np.maximum(band[:-1], 1.0)))
    return {
        "skipped": False,
        "theory_slope": theory,
        "fitted_slope": float(slope),
        "fitted_offset": float(offset),
        "relative_slope_error": float(abs(slope - theory) / theory),
        "offsets": offsets.tolist(),
        "offset_band": float(band.max()),
        "offset_band_non_growing": non_growing,
        "R": R.tolist(),
        "action": A.tolist(),
    }
