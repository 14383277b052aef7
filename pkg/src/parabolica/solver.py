"""Critical points of the discrete Maupertuis functional and collision regularization.

Minimizers come from descent with a convexified banded Newton direction,
finished by Newton on the exact Hessian.  Index-one saddles in the class of
loops winding around one centre come from a pinned loop: every member keeps
its node nearest ``t = 0`` fixed on a small circle around the centre and is
relaxed with the others; the highest member is then refined by Newton (or by
eigenvector following when a nearly singular mode makes Newton cycle).  The
strong-force parameter ``beta`` is continued to zero from warm starts, and a
multiple-shooting polish turns the discrete critical path into an ODE
trajectory.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.linalg import ldl, solve_banded, solveh_banded
from scipy.optimize import brentq

from . import pathspace as ps
from . import potential as pot
from .errors import (
    CollisionEncountered,
    CollisionEvaluation,
    CollisionPath,
    DegreeBroken,
    IndexViolation,
    NotConverged,
    NumericalError,
    UnresolvedDegree,
)

log = logging.getLogger(__name__)


def default_beta_schedule() -> tuple[float, ...]:
    return tuple([2.0**-k for k in range(21)] + [0.0])


@dataclass(frozen=True)
class SolverOptions:
    tol_grad: float = 1e-8
    max_iters: int = 4000
    n_nodes: int = 256
    loop_size: int = 16
    beta_schedule: tuple = field(default_factory=default_beta_schedule)
    seed: int = 0
    newton_damping: float = 1e-8
    newton_iters: int = 60
    relax_tol: float = 2e-3
    relax_iters: int = 3000
    eig_threshold: float = 1e-8
    collision_threshold: float = ps.COLLISION_THRESHOLD
    degree_check_every: int = 1

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["beta_schedule"] = list(self.beta_schedule)
        return d


@dataclass
class CriticalPoint:
    path: ps.DiscretePath
    beta: float
    grad_norm: float
    value: float
    morse_index: int
    omega: float
    morse_index_check: int | None = None
    lowest_eigenvalues: np.ndarray | None = None
    iterations: int = 0
    generalized_candidate: bool = False
    min_centre_distance: float = np.inf
    history: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "beta": self.beta,
            "grad_norm": self.grad_norm,
            "value": self.value,
            "morse_index": self.morse_index,
            "morse_index_check": self.morse_index_check,
            "omega": self.omega,
            "iterations": self.iterations,
            "generalized_candidate": self.generalized_candidate,
            "min_centre_distance": self.min_centre_distance,
            "lowest_eigenvalues": [] if self.lowest_eigenvalues is None else list(map(float, self.lowest_eigenvalues)),
        }


# ---------------------------------------------------------------------------
# linear algebra helpers


def relative_gradient(path, gradient, modifier, config) -> float:
    """Sup of the nodal Euler-Lagrange residual relative to the force scale."""
    w = ps.trapezoid_weights(path.times)[1:-1]
    kin, _ = ps.maupertuis_parts(path, modifier, config)
    force = np.max(np.linalg.norm(modifier.gradV(config, path.nodes), axis=1))
    res = np.linalg.norm(gradient[1:-1], axis=1) / w
    return float(np.max(res) / (kin * force))


def _full_band(parts: ps.HessianParts, shift: float = 0.0) -> np.ndarray:
    """General banded storage ``(11, N)`` of the sparse Hessian part plus ``shift I``."""
    up = parts.banded()
    N = up.shape[1]
    ab = np.zeros((11, N))
    ab[:6] = up
    ab[5] += shift
    for k in range(1, 6):
        ab[5 + k, : N - k] = up[5 - k, k:]
    return ab


def hessian_solve(parts: ps.HessianParts, rhs: np.ndarray, shift: float = 0.0) -> np.ndarray:
    """Solve ``(H + shift I) x = rhs`` by banded LU and a rank-two Woodbury update."""
    ab = _full_band(parts, shift)
    U = np.stack([parts.a, parts.b], axis=1)
    sol = solve_banded((5, 5), ab, np.column_stack([rhs, U]), check_finite=False)
    y, Z = sol[:, 0], sol[:, 1:]
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    S = C + U.T @ Z
    return y - Z @ np.linalg.solve(S, U.T @ y)


def kinetic_preconditioner(path: ps.DiscretePath, potv: float):
    """Banded factor data of ``2 pot L`` acting on each coordinate (H^1 metric)."""
    dt = np.diff(path.times)
    inv = 1.0 / dt
    m = path.n - 1
    ab = np.zeros((2, m))
    ab[1] = 2 * potv * (inv[:-1] + inv[1:])
    ab[0, 1:] = -2 * potv * inv[1:-1]
    return ab


def apply_preconditioner(ab, vec: np.ndarray) -> np.ndarray:
    return solveh_banded(ab, vec.reshape(-1, 3), check_finite=False).ravel()


def spectral_norm_bound(H: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(H), axis=1)))


def morse_index_dense(H: np.ndarray, threshold: float = 1e-8) -> tuple[int, np.ndarray]:
    ev = np.linalg.eigvalsh(H)
    scale = max(abs(ev[0]), abs(ev[-1]))
    return int(np.sum(ev < -threshold * scale)), ev


def morse_index_inertia(H: np.ndarray, threshold: float = 1e-8, scale: float | None = None) -> int:
    """Count of eigenvalues below ``-threshold * scale`` from the inertia of a shifted LDL^T."""
    scale = spectral_norm_bound(H) if scale is None else scale
    shift = threshold * scale
    _, D, _ = ldl(H + shift * np.eye(len(H)))
    neg = 0
    i = 0
    while i < len(D):
        if i + 1 < len(D) and D[i + 1, i] != 0.0:
            neg += int(np.sum(np.linalg.eigvalsh(D[i : i + 2, i : i + 2]) < 0))
            i += 2
        else:
            neg += int(D[i, i] < 0)
            i += 1
    return neg


def morse_data(path, modifier, config, threshold=1e-8):
    H = ps.maupertuis_hessian(path, modifier, config)
    idx, ev = morse_index_dense(H, threshold)
    scale = max(abs(ev[0]), abs(ev[-1]))
    idx2 = morse_index_inertia(H, threshold, scale)
    return idx, idx2, ev[:6]


def _make_point(path, modifier, config, options, iterations, history=None) -> CriticalPoint:
    g = ps.maupertuis_gradient(path, modifier, config)
    idx, idx2, ev = morse_data(path, modifier, config, options.eig_threshold)
    return CriticalPoint(
        path=path,
        beta=modifier.beta,
        grad_norm=relative_gradient(path, g, modifier, config),
        value=ps.maupertuis_value(path, modifier, config),
        morse_index=idx,
        omega=ps.omega_of(path, modifier, config),
        morse_index_check=idx2,
        lowest_eigenvalues=ev,
        iterations=iterations,
        min_centre_distance=float(np.min(ps.segment_distances(path.nodes, config))),
        history=history or {},
    )


def _safe_value(path, modifier, config, threshold):
    try:
        if ps.min_collision_distance(path.nodes, config) <= threshold:
            return np.inf
        return ps.maupertuis_value(path, modifier, config)
    except (CollisionPath, CollisionEvaluation):
        return np.inf


# ---------------------------------------------------------------------------
# descent and Newton


def _mask(g: np.ndarray, pinned) -> np.ndarray:
    g = g.copy()
    for k in pinned:
        g[k] = 0.0
    return g


def pinned_hessian_solve(parts: ps.HessianParts, rhs: np.ndarray, shift: float = 0.0, pinned=()) -> np.ndarray:
    """``hessian_solve`` with the rows and columns of pinned nodes replaced by the identity."""
    if not pinned:
        return hessian_solve(parts, rhs, shift)
    ab = _full_band(parts, shift)
    a, b, rhs = parts.a.copy(), parts.b.copy(), rhs.copy()
    N = ab.shape[1]
    for k in pinned:
        for p in range(3):
            i = 3 * (k - 1) + p
            ab[:, i] = 0.0
            for c in range(max(0, i - 5), min(N, i + 6)):
                ab[5 + i - c, c] = 0.0
            ab[5, i] = 1.0
            a[i] = b[i] = rhs[i] = 0.0
    U = np.stack([a, b], axis=1)
    sol = solve_banded((5, 5), ab, np.column_stack([rhs, U]), check_finite=False)
    y, Z = sol[:, 0], sol[:, 1:]
    S = np.array([[0.0, 1.0], [1.0, 0.0]]) + U.T @ Z
    return y - Z @ np.linalg.solve(S, U.T @ y)


def convexified_solve(parts: ps.HessianParts, rhs: np.ndarray, pinned=()) -> np.ndarray:
    """Solve with the positive semidefinite part of the Hessian.

    The kinetic Laplacian is kept, each 3x3 potential block is clipped to its
    nonnegative eigenvalues and the rank-two coupling is dropped; the result
    is a banded SPD matrix.
    """
    w, Q = np.linalg.eigh(parts.blocks)
    blocks = np.einsum("kij,kj,klj->kil", Q, np.maximum(w, 0.0), Q)
    pd = ps.HessianParts(parts.kin, parts.potv, parts.lap_diag, parts.lap_off, blocks, parts.a, parts.b)
    ab = pd.banded()
    rhs = rhs.copy()
    N = ab.shape[1]
    for k in pinned:
        for p in range(3):
            i = 3 * (k - 1) + p
            for c in range(i, min(N, i + 6)):
                ab[5 - (c - i), c] = 0.0
            for r in range(max(0, i - 5), i):
                ab[5 - (i - r), i] = 0.0
            ab[5, i] = 1.0
            rhs[i] = 0.0
    return solveh_banded(ab, rhs, check_finite=False)


def _descend(path, modifier, config, options: SolverOptions, pinned=(), max_iters=None):
    """Armijo descent with H^1 preconditioning, switching to Newton near a minimizer.

    Returns ``(path, relative_gradient, iterations, values)``.
    """
    max_iters = options.max_iters if max_iters is None else max_iters
    thr = options.collision_threshold
    value = ps.maupertuis_value(path, modifier, config)
    g = _mask(ps.maupertuis_gradient(path, modifier, config), pinned)
    rg = relative_gradient(path, g, modifier, config)
    values = [value]
    step = 1.0
    it = 0
    for it in range(1, max_iters + 1):
        if rg < options.tol_grad:
            break
        gi = g[1:-1].ravel()
        parts = ps.maupertuis_hessian_parts(path, modifier, config)
        d = -convexified_solve(parts, gi, pinned)
        newton = False
        if rg < 1e-2:
            dn = -pinned_hessian_solve(parts, gi, options.newton_damping, pinned)
            if dn @ gi < 0:
                d, newton = dn, True
        if not newton:
            # no node moves by more than a quarter of its distance to the centres
            nodes = path.interior
            dist = np.min(np.linalg.norm(nodes[:, None, :] - config.positions[None], axis=-1), axis=1)
            disp = np.linalg.norm(d.reshape(-1, 3), axis=1)
            d = d * min(1.0, float(np.min(0.25 * dist / np.maximum(disp, 1e-300))))
        slope = d @ gi
        lam = 1.0 if newton else min(1.0, 2 * step)
        accepted = False
        while lam > 1e-14:
            trial = path.with_interior(path.interior.ravel() + lam * d)
            tv = _safe_value(trial, modifier, config, thr)
            if np.isfinite(tv):
                if tv <= value + 1e-4 * lam * slope:
                    accepted = True
                elif newton and tv <= value + 1e-13 * abs(value):
                    gt = _mask(ps.maupertuis_gradient(trial, modifier, config), pinned)
                    accepted = relative_gradient(trial, gt, modifier, config) < rg
            elif modifier.beta == 0.0 and lam < 1e-8:
                raise CollisionEncountered("descent reached the collision set", candidate=path)
            if accepted:
                break
            lam *= 0.5
        if not accepted:
            break
        if not newton:
            step = lam
        path, value = trial, tv
        values.append(value)
        g = _mask(ps.maupertuis_gradient(path, modifier, config), pinned)
        rg = relative_gradient(path, g, modifier, config)
    return path, rg, it, values


def timing_shift(path, sigma: float):
    """Slide the nodes along the spline through them by ``sigma (1 - s^2)`` in the parameter.

    This moves the passage along the path without the chord error of a
    linear displacement; the endpoints stay fixed.
    """
    spline = CubicSpline(path.times, path.nodes, axis=0)
    s = path.times
    nodes = spline(s + sigma * (1 - s**2))
    nodes[0], nodes[-1] = path.nodes[0], path.nodes[-1]
    return ps.DiscretePath(nodes, s)


def align_timing(path, modifier, config, max_shift: float = 1e-2):
    """Move ``path`` to the stationary point of the functional along ``timing_shift``.

    The timing of the passage is the softest direction of the discrete
    problem and the functional is far from quadratic along it, so Newton
    overshoots; a bracketed root of the directional derivative does not.
    """
    spline = CubicSpline(path.times, path.nodes, axis=0)
    s = path.times
    bump = (1 - s**2)[1:-1, None]

    def slope(sigma):
        q = timing_shift(path, sigma)
        g = ps.maupertuis_gradient(q, modifier, config)[1:-1]
        return float(np.sum(g * spline(s[1:-1] + sigma * bump[:, 0], 1) * bump))

    f0 = slope(0.0)
    h = -np.sign(f0) * 1e-7
    while np.sign(slope(h)) == np.sign(f0):
        h *= 2
        if abs(h) > max_shift:
            return path
    return timing_shift(path, brentq(slope, 0.0, h, xtol=1e-15))


def newton_refine(path, modifier, config, options: SolverOptions = SolverOptions(), max_iters=None):
    """Damped Newton on the gradient.

    Full steps are accepted non-monotonically (the relative gradient may not
    exceed the largest of the last few accepted values).  After a rejected
    full step the passage timing is realigned once; if the next full step is
    rejected too it is halved until the relative gradient decreases.
    """
    max_iters = options.newton_iters if max_iters is None else max_iters
    thr = options.collision_threshold
    g = ps.maupertuis_gradient(path, modifier, config)
    rg = relative_gradient(path, g, modifier, config)
    recent = [rg]

    def attempt(trial):
        if ps.min_collision_distance(trial.nodes, config) <= thr:
            return np.inf, None
        try:
            gt = ps.maupertuis_gradient(trial, modifier, config)
        except (CollisionPath, CollisionEvaluation):
            return np.inf, None
        return relative_gradient(trial, gt, modifier, config), gt

    it = 0
    aligned = False
    for it in range(1, max_iters + 1):
        if rg < options.tol_grad:
            break
        parts = ps.maupertuis_hessian_parts(path, modifier, config)
        step = -hessian_solve(parts, g[1:-1].ravel(), options.newton_damping)
        x0 = path.interior.ravel()
        rt, gt = attempt(path.with_interior(x0 + step))
        if not rt < max(recent[-5:]) and not aligned:
            # usually the timing mode: realign the passage and take the next Newton step from there
            try:
                path = align_timing(path, modifier, config)
                g = ps.maupertuis_gradient(path, modifier, config)
            except (CollisionPath, CollisionEvaluation):
                pass
            else:
                rg = relative_gradient(path, g, modifier, config)
                aligned = True
                continue
        aligned = False
        lam = 1.0
        if not rt < max(recent[-5:]):
            while True:
                lam *= 0.5
                if lam <= 1e-6:
                    break
                rt, gt = attempt(path.with_interior(x0 + lam * step))
                if rt < (1 - 1e-4 * lam) * rg:
                    break
        if lam <= 1e-6:
            break
        path, g, rg = path.with_interior(x0 + lam * step), gt, rt
        recent.append(rg)
    return path, rg, it


def eigenvector_following(path, modifier, config, options: SolverOptions = SolverOptions(), target_index=1, max_iters=40, kick=None):
    """Newton iteration on the eigenbasis that ascends only the lowest ``target_index`` modes.

    Used to leave a critical point whose index exceeds the target through a
    soft mode: the point is first displaced along the surplus negative
    eigenvectors by ``kick`` (sup-norm), then every mode above the target is
    treated as a descent direction.
    """
    thr = options.collision_threshold
    H = ps.maupertuis_hessian(path, modifier, config)
    lam, V = np.linalg.eigh(H)
    if kick is not None:
        surplus = [i for i in range(target_index, len(lam)) if lam[i] < 0]
        if surplus:
            v = V[:, surplus[0]]
            path = path.with_interior(path.interior.ravel() + kick * v / np.max(np.abs(v)))
    g = ps.maupertuis_gradient(path, modifier, config)
    rg = relative_gradient(path, g, modifier, config)
    it = 0
    for it in range(1, max_iters + 1):
        if rg < options.tol_grad:
            break
        H = ps.maupertuis_hessian(path, modifier, config)
        lam, V = np.linalg.eigh(H)
        gc = V.T @ g[1:-1].ravel()
        floor = options.newton_damping * max(abs(lam[0]), abs(lam[-1]))
        denom = np.maximum(np.abs(lam), floor)
        # uphill along the lowest modes, downhill along all others
        coef = -gc / denom
        coef[:target_index] = gc[:target_index] / denom[:target_index]
        step = V @ coef
        nodes = path.interior
        dist = np.min(np.linalg.norm(nodes[:, None, :] - config.positions[None], axis=-1), axis=1)
        disp = np.linalg.norm(step.reshape(-1, 3), axis=1)
        sc = min(1.0, float(np.min(0.25 * dist / np.maximum(disp, 1e-300))))
        accepted = False
        while sc > 1e-6:
            trial = path.with_interior(path.interior.ravel() + sc * step)
            if ps.min_collision_distance(trial.nodes, config) > thr:
                gt = ps.maupertuis_gradient(trial, modifier, config)
                rt = relative_gradient(trial, gt, modifier, config)
                if rt < 1.5 * rg:
                    accepted = True
                    break
            sc *= 0.5
        if not accepted:
            break
        path, g, rg = trial, gt, rt
    return path, rg, it


def warm_refine(path, modifier, config, options: SolverOptions = SolverOptions(), target_index=1):
    """Newton from a nearby critical point, falling back to eigenvector following.

    Plain Newton can cycle when the Hessian has a nearly singular mode whose
    eigenvalue changes sign along the iteration; the eigenbasis step treats
    that mode as a descent direction and converges.
    """
    new, rg, its = newton_refine(path, modifier, config, options)
    if rg < options.tol_grad:
        return new, rg, its
    best = (new, rg, its)
    for start in (path, new):
        try:
            p, r, k = eigenvector_following(start, modifier, config, options, target_index, max_iters=options.newton_iters)
        except (CollisionPath, CollisionEvaluation):
            continue
        if r < best[1]:
            best = (p, r, its + k)
        if r < options.tol_grad:
            break
    return best


def minimize(path, modifier, config, options: SolverOptions = SolverOptions()) -> CriticalPoint:
    """Local minimizer of the discrete functional from a collision-free start."""
    if ps.min_collision_distance(path.nodes, config) <= options.collision_threshold:
        raise CollisionPath("initial path collides")
    path, rg, its, values = _descend(path, modifier, config, options)
    if rg >= options.tol_grad:
        raise NotConverged(f"minimize stopped at relative gradient {rg:.3e}", best=path)
    return _make_point(path, modifier, config, options, its, {"values": values})


# ---------------------------------------------------------------------------
# loops


def pin_node_index(times) -> int:
    """Node closest to the parameter midpoint ``t = 0``."""
    return int(np.argmin(np.abs(np.asarray(times))))


def initial_loop(
    config,
    q_minus,
    q_plus,
    times,
    centre: int = 0,
    other: int = 1,
    loop_size: int = 16,
    radius: float | None = None,
    core_time: float = 1.0,
) -> ps.PathLoop:
    """Loop of paths threading a circle around one centre.

    The base path runs radially from ``q_minus`` to the origin and out to
    ``q_plus`` with the rectilinear parabolic profile ``|t|^(2/(2+alpha))``;
    near ``t = 0`` a bump moves member ``j`` onto the point at angle
    ``2 pi j / M`` of a circle around the chosen centre, in the plane
    orthogonal to ``q_plus - q_minus``.  The circle is half as wide as the
    transverse offset of the other centre, so only the chosen centre is
    enclosed.
    """
    from .kepler import gamma_const

    q_minus, q_plus = np.asarray(q_minus, float), np.asarray(q_plus, float)
    a = config.alpha
    p = 2 / (2 + a)
    t = np.asarray(times)
    base = np.where(t[:, None] < 0, (np.abs(t) ** p)[:, None] * q_minus, (np.abs(t) ** p)[:, None] * q_plus)
    R_mean = 0.5 * (np.linalg.norm(q_minus) + np.linalg.norm(q_plus))
    omega_est = (R_mean / gamma_const(a, config.total_mass)) ** ((2 + a) / 2)
    bump = 1.0 - ps.smoothstep5((np.abs(omega_est * t) - core_time) / core_time)
    d = q_plus - q_minus
    d /= np.linalg.norm(d)
    c = config.positions[centre]
    off = config.positions[other] - c
    e1 = off - (off @ d) * d
    if np.linalg.norm(e1) < 1e-8:
        raise ValueError("the other centre lies on the chord direction through this centre")
    if radius is None:
        radius = 0.5 * np.linalg.norm(e1)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(d, e1)
    members = []
    for j in range(loop_size):
        s = 2 * np.pi * j / loop_size
        ring = c + radius * (np.cos(s) * e1 + np.sin(s) * e2)
        members.append(base + bump[:, None] * ring)
    members = np.array(members)
    members[:, 0] = q_minus
    members[:, -1] = q_plus
    return ps.PathLoop(members, t)


@dataclass
class RelaxationResult:
    loop: ps.PathLoop
    climber: int
    values: np.ndarray
    sweeps: int
    degrees: tuple
    history: list


def relax_loop(
    loop: ps.PathLoop,
    modifier,
    config,
    options: SolverOptions = SolverOptions(),
    centres=(0, 1),
    pin_node: int | None = None,
    sweeps: int = 40,
    steps_per_sweep: int = 25,
) -> RelaxationResult:
    """Relax every member with its pin node held fixed, re-tension, track the argmax.

    Each sweep (a) descends every member a few steps, (b) replaces a member
    by the relaxed average of its neighbours when that is lower and keeps the
    loop degrees, and (c) records the argmax member.  Sweeps stop once every
    member is stationary to ``relax_tol`` and the argmax is stable.
    """
    k = pin_node_index(loop.times) if pin_node is None else pin_node
    deg0 = ps.loop_degrees(loop, config, centres)
    if deg0[0] == 0 or deg0[1] != 0:
        raise DegreeBroken(f"loop is not admissible, degrees {deg0}")
    members = loop.members.copy()
    times = loop.times
    M = len(members)
    rel_opts = replace(options, tol_grad=options.relax_tol * 1e-3)
    vals = np.empty(M)
    rgs = np.empty(M)
    history = []
    climber = -1
    sweep = 0
    for sweep in range(1, sweeps + 1):
        old = members.copy()
        for j in range(M):
            p, rg, _, v = _descend(ps.DiscretePath(members[j], times), modifier, config, rel_opts, (k,), steps_per_sweep)
            members[j], vals[j], rgs[j] = p.nodes, v[-1], rg
        try:
            deg = ps.loop_degrees(ps.PathLoop(members, times), config, centres)
        except UnresolvedDegree:
            deg = None
        if deg != deg0:
            raise DegreeBroken(f"member descent changed the loop degrees to {deg}")
        # re-tension
        for j in range(M):
            cand = 0.5 * (members[(j - 1) % M] + members[(j + 1) % M])
            cand[k] = members[j, k]
            cand[0], cand[-1] = members[j, 0], members[j, -1]
            if ps.min_collision_distance(cand, config) <= options.collision_threshold:
                continue
            p, rg, _, v = _descend(ps.DiscretePath(cand, times), modifier, config, rel_opts, (k,), steps_per_sweep)
            if v[-1] < vals[j] * (1 - 1e-9):
                trial = members.copy()
                trial[j] = p.nodes
                try:
                    if ps.loop_degrees(ps.PathLoop(trial, times), config, centres) == deg0:
                        members, vals[j], rgs[j] = trial, v[-1], rg
                except UnresolvedDegree:
                    pass
        new_climber = int(np.argmax(vals))
        history.append((float(vals[new_climber]), float(rgs.max()), new_climber))
        done = rgs.max() < options.relax_tol and new_climber == climber
        climber = new_climber
        if done:
            break
        del old
    return RelaxationResult(ps.PathLoop(members, times), climber, vals.copy(), sweep, deg0, history)


def _refined_argmax_member(relax: RelaxationResult, modifier, config, options, pin_node):
    """Member pinned at the parabolic interpolant of the values around the argmax."""
    M, j = relax.loop.size, relax.climber
    vm, v0, vp = relax.values[(j - 1) % M], relax.values[j], relax.values[(j + 1) % M]
    den = vm - 2 * v0 + vp
    shift = 0.0 if den >= 0 else float(np.clip(0.5 * (vm - vp) / den, -0.5, 0.5))
    if abs(shift) < 1e-3:
        return relax.loop.path(j)
    nb = (j + 1) % M if shift > 0 else (j - 1) % M
    w = abs(shift)
    nodes = (1 - w) * relax.loop.members[j] + w * relax.loop.members[nb]
    if ps.min_collision_distance(nodes, config) <= options.collision_threshold:
        return relax.loop.path(j)
    rel_opts = replace(options, tol_grad=options.relax_tol * 1e-3)
    p, _, _, v = _descend(ps.DiscretePath(nodes, relax.loop.times), modifier, config, rel_opts, (pin_node,), 200)
    return p if v[-1] > v0 else relax.loop.path(j)


def reduce_index(cp: CriticalPoint, modifier, config, options: SolverOptions = SolverOptions(), target_index=1):
    """Try to move from an index-two critical point to a neighbouring index-one point.

    Kicks of increasing size along the surplus negative eigenvector, followed
    by eigenvector following; returns ``cp`` unchanged if no kick succeeds.
    """
    scale = float(np.max(np.linalg.norm(cp.path.nodes, axis=1)))
    for kick in (1e-3, 1e-2, 3e-2, 1e-1):
        for sign in (1.0, -1.0):
            try:
                path, rg, its = eigenvector_following(cp.path, modifier, config, options, target_index, kick=sign * kick * scale)
            except (CollisionPath, CollisionEvaluation):
                continue
            if rg < options.tol_grad:
                new = _make_point(path, modifier, config, options, cp.iterations + its, cp.history)
                if new.morse_index <= target_index and abs(new.value - cp.value) < 1e-2 * abs(cp.value):
                    new.history["index_reduced_from"] = cp.morse_index
                    return new
    return cp


def saddle_search(loop, modifier, config, options: SolverOptions = SolverOptions(), centres=(0, 1)):
    """Index-at-most-one critical point from a loop winding around ``centres[0]``."""
    k = pin_node_index(loop.times)
    relax = relax_loop(loop, modifier, config, options, centres, k)
    starts = [_refined_argmax_member(relax, modifier, config, options, k), relax.loop.path(relax.climber)]
    best = None
    for start in starts:
        path, rg, its = warm_refine(start, modifier, config, options)
        if rg < options.tol_grad:
            cp = _make_point(path, modifier, config, options, relax.sweeps + its, {"relax": relax.history})
            if cp.morse_index > 1:
                cp = reduce_index(cp, modifier, config, options)
            cp.history["loop"] = relax.loop
            if cp.morse_index <= 1:
                return cp
            best = cp
        elif best is None:
            best = path
    if isinstance(best, CriticalPoint):
        raise IndexViolation(f"Morse index {best.morse_index} exceeds 1", point=best)
    raise NotConverged("Newton refinement of the argmax member did not converge", best=best)


def _warm_step(prev: CriticalPoint, beta, config, options, delta_star) -> CriticalPoint:
    mod = ps.StrongForceModifier(beta, delta_star)
    path, rg, its = warm_refine(prev.path, mod, config, options)
    if rg >= options.tol_grad:
        raise NotConverged("warm refinement stalled", best=path)
    cp = _make_point(path, mod, config, options, its)
    if cp.morse_index > 1:
        cp = reduce_index(cp, mod, config, options)
    if cp.morse_index > 1:
        raise IndexViolation("index above one after warm start", point=cp)
    return cp


def _continue_to(prev: CriticalPoint, beta, config, options, delta_star, depth=0, max_depth=6) -> CriticalPoint:
    """Warm step from ``prev`` to ``beta``, bisecting the step in ``beta`` on failure."""
    try:
        return _warm_step(prev, beta, config, options, delta_star)
    except (NotConverged, IndexViolation):
        if depth >= max_depth:
            raise
    mid = 0.5 * (prev.beta + beta)
    log.info("bisecting beta step %g -> %g at %g", prev.beta, beta, mid)
    half = _continue_to(prev, mid, config, options, delta_star, depth + 1, max_depth)
    return _continue_to(half, beta, config, options, delta_star, depth + 1, max_depth)


def beta_continuation(loop, config, beta_schedule=None, options: SolverOptions = SolverOptions(), delta_star=0.5, centres=(0, 1)):
    """Warm-started saddle search along a decreasing ``beta`` schedule ending at zero.

    Each step refines the previous critical point; a failing step is bisected
    in ``beta`` a few times before falling back to a fresh loop relaxation.
    """
    schedule = list(options.beta_schedule if beta_schedule is None else beta_schedule)
    if any(b2 > b1 for b1, b2 in zip(schedule, schedule[1:])) or schedule[-1] != 0.0:
        raise ValueError("beta schedule must be non-increasing and end at 0")
    points = []
    cp = None
    for beta in schedule:
        mod = ps.StrongForceModifier(beta, delta_star)
        if cp is None:
            cp = saddle_search(loop, mod, config, options, centres)
        else:
            prev = cp
            try:
                cp = _continue_to(prev, beta, config, options, delta_star)
            except (NotConverged, IndexViolation):
                log.info("warm continuation failed at beta=%g, relaxing the loop again", beta)
                cp = saddle_search(prev.history.get("loop", loop), mod, config, options, centres)
            except (CollisionPath, CollisionEvaluation):
                if beta == 0.0:
                    prev.generalized_candidate = True
                    raise CollisionEncountered("beta = 0 refinement collided", candidate=prev)
                raise
            cp.history.setdefault("loop", prev.history.get("loop"))
        if beta == 0.0 and cp.min_centre_distance < options.collision_threshold:
            cp.generalized_candidate = True
            raise CollisionEncountered("beta = 0 point reaches the collision set", candidate=cp)
        log.info("beta=%g value=%.10g index=%d grad=%.2e dist=%.3g", beta, cp.value, cp.morse_index, cp.grad_norm, cp.min_centre_distance)
        points.append(cp)
    return points


# ---------------------------------------------------------------------------
# ODE polish


@dataclass
class PolishResult:
    trajectory: ps.TrueTimeTrajectory
    omega: float
    boundary_error: float
    energy_residual: float
    mismatch: float
    iterations: int


def _ode_rhs(modifier, config):
    def rhs(s, z, omega):
        x, v = z[:3], z[3:6]
        return omega * np.concatenate([v, modifier.gradV(config, x)])

    return rhs


def _ode_variational(modifier, config):
    def rhs(t, z):
        x, v = z[:3], z[3:6]
        P = z[6:].reshape(6, 6)
        dP = np.empty_like(P)
        dP[:3] = P[3:]
        dP[3:] = modifier.hessV(config, x) @ P[:3]
        return np.concatenate([v, modifier.gradV(config, x), dP.ravel()])

    return rhs


def polish_trajectory(
    path: ps.DiscretePath,
    config,
    modifier=None,
    segments: int | None = None,
    rtol: float = 1e-12,
    tol: float = 1e-11,
    max_iters: int = 40,
    samples_per_node: int = 4,
) -> PolishResult:
    """Multiple shooting on ``x'' = grad V`` seeded by a discrete critical path.

    Unknowns are the state at the start of each segment and the segment
    durations.  Equations: both endpoint conditions, zero energy at the
    start, continuity at the breakpoints, and one section condition per
    breakpoint pinning it to the plane through the corresponding node of the
    seed path orthogonal to the path.  With the breakpoints tied to geometry
    rather than to fixed times, errors in the timing of the seed (the softest
    direction of the discrete Hessian) become small changes of the durations
    instead of large state corrections.

    Zero energy is also imposed, relative to ``V``, at every breakpoint.  The
    extra rows are consistent at the solution and the system is solved by
    Gauss-Newton.  Without them the far-arm durations are nearly free: the
    travel time out to a large radius depends very strongly on the energy, and
    a single energy row at the start leaves Newton overshooting along that
    direction.  The result covers ``[-omega, omega]``.
    """
    modifier = modifier or ps.StrongForceModifier(0.0)
    n = path.n
    # one segment per four nodes by default; long segments in the far arms lose the Newton basin
    segments = min(segments or max(16, n // 4), n)
    idx = np.unique(np.round(np.linspace(0, n, segments + 1)).astype(int))
    K = len(idx) - 1
    spline = CubicSpline(path.times, path.nodes, axis=0)
    omega0 = ps.omega_of(path, modifier, config)
    sb = path.times[idx]
    Z = np.hstack([path.nodes[idx[:-1]], spline(sb[:-1], 1) / omega0])
    T = omega0 * np.diff(sb)
    anchors = path.nodes[idx[1:-1]]
    normals = spline(sb[1:-1], 1)
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    q_minus, q_plus = path.q_minus, path.q_plus
    rhs = _ode_variational(modifier, config)
    eye = np.eye(6).ravel()

    def shoot_all(Z, T):
        ends, jacs = [], []
        for k in range(K):
            if T[k] <= 0:
                raise NumericalError("non-positive segment duration")
            sol = solve_ivp(rhs, (0.0, T[k]), np.concatenate([Z[k], eye]), method="DOP853",
                            rtol=rtol, atol=rtol * 1e-2)
            if not sol.success:
                raise NumericalError(f"segment {k} integration failed: {sol.message}")
            ends.append(sol.y[:6, -1])
            jacs.append(sol.y[6:, -1].reshape(6, 6))
        return np.array(ends), jacs

    def residual(Z, ends):
        x0, v0 = Z[0, :3], Z[0, 3:]
        res = [x0 - q_minus, [0.5 * v0 @ v0 - float(modifier.V(config, x0))]]
        for k in range(K - 1):
            res.append(ends[k] - Z[k + 1])
        res.append(ends[-1][:3] - q_plus)
        res.append(np.einsum("ij,ij->i", Z[1:, :3] - anchors, normals))
        Vk = modifier.V(config, Z[1:, :3])
        res.append((0.5 * np.einsum("ij,ij->i", Z[1:, 3:], Z[1:, 3:]) - Vk) / Vk)
        return np.concatenate(res)

    N = 7 * K

    def jacobian(Z, ends, jacs):
        # columns: 6K states, then K durations; K - 1 extra energy rows
        J = np.zeros((N + K - 1, N))
        J[0:3, 0:3] = np.eye(3)
        J[3, 0:3] = -modifier.gradV(config, Z[0, :3])
        J[3, 3:6] = Z[0, 3:]
        row = 4
        for k in range(K - 1):
            J[row:row + 6, 6 * k:6 * k + 6] = jacs[k]
            J[row:row + 6, 6 * k + 6:6 * k + 12] = -np.eye(6)
            J[row:row + 6, 6 * K + k] = np.concatenate([ends[k][3:], modifier.gradV(config, ends[k][:3])])
            row += 6
        J[row:row + 3, 6 * (K - 1):6 * K] = jacs[-1][:3]
        J[row:row + 3, 6 * K + K - 1] = ends[-1][3:]
        row += 3
        for k in range(K - 1):
            J[row + k, 6 * (k + 1):6 * (k + 1) + 3] = normals[k]
        row += K - 1
        for k in range(K - 1):
            x, v = Z[k + 1, :3], Z[k + 1, 3:]
            Vk = float(modifier.V(config, x))
            J[row + k, 6 * (k + 1):6 * (k + 1) + 3] = -(0.5 * v @ v) * modifier.gradV(config, x) / Vk**2
            J[row + k, 6 * (k + 1) + 3:6 * (k + 1) + 6] = v / Vk
        return J

    def unpack(u):
        return u[:6 * K].reshape(K, 6), u[6 * K:]

    def evaluate(u):
        Zu, Tu = unpack(u)
        ends, jacs = shoot_all(Zu, Tu)
        return residual(Zu, ends), ends, jacs

    u = np.concatenate([Z.ravel(), T])
    F, ends, jacs = evaluate(u)
    it = 0
    for it in range(1, max_iters + 1):
        if np.max(np.abs(F)) < tol:
            break
        delta = np.linalg.lstsq(jacobian(unpack(u)[0], ends, jacs), -F, rcond=None)[0]
        # keep every duration positive
        neg = delta[6 * K:] < 0
        lam = min(1.0, float(np.min(0.9 * u[6 * K:][neg] / -delta[6 * K:][neg]))) if neg.any() else 1.0
        f0 = np.linalg.norm(F)
        while True:
            try:
                Ft, ends_t, jacs_t = evaluate(u + lam * delta)
                if np.linalg.norm(Ft) < (1 - 1e-4 * lam) * f0:
                    break
            except (NumericalError, CollisionEvaluation):
                pass
            lam *= 0.5
            if lam < 1e-8:
                raise NotConverged(f"shooting line search failed at residual {np.max(np.abs(F)):.3e}")
        log.debug("shooting iteration %d residual %.3e step %.3g", it, np.max(np.abs(Ft)), lam)
        u = u + lam * delta
        F, ends, jacs = Ft, ends_t, jacs_t
    if np.max(np.abs(F)) >= tol:
        raise NotConverged(f"shooting residual {np.max(np.abs(F)):.3e} after {it} iterations")

    Z, T = unpack(u)
    omega = 0.5 * float(np.sum(T))
    starts = -omega + np.concatenate([[0.0], np.cumsum(T)[:-1]])
    ts, xs, vs = [], [], []
    for k in range(K):
        m = samples_per_node * (idx[k + 1] - idx[k])
        t_eval = np.linspace(0.0, T[k], m + 1)
        sol = solve_ivp(lambda t, y: np.concatenate([y[3:], modifier.gradV(config, y[:3])]), (0.0, T[k]), Z[k],
                        method="DOP853", rtol=rtol, atol=rtol * 1e-2, t_eval=t_eval)
        sl = slice(None) if k == K - 1 else slice(None, -1)
        ts.append(starts[k] + sol.t[sl])
        xs.append(sol.y[:3, sl].T)
        vs.append(sol.y[3:, sl].T)
    t_all = np.concatenate(ts)
    t_all[-1] = omega
    traj = ps.TrueTimeTrajectory(t_all, np.vstack(xs), np.vstack(vs), omega, modifier.beta)
    h = traj.compute_residual(config, modifier)
    boundary = max(np.linalg.norm(traj.x[0] - q_minus), np.linalg.norm(traj.x[-1] - q_plus))
    mismatch = float(np.max(np.abs(F[4:4 + 6 * (K - 1)]))) if K > 1 else 0.0
    return PolishResult(traj, omega, float(boundary), float(np.max(np.abs(h))), mismatch, it)


# ---------------------------------------------------------------------------
# collision regularization (alpha = 1)


def _require_kepler_exponent(config):
    if config.alpha != 1.0:
        raise ValueError("the (x, y, w) regularization is only available for alpha = 1")


def sperling_field(state, config, centre: int = 0):
    """Right-hand side ``(x', y', w')`` of the regularized zero-energy flow near ``centre``.

    ``state`` is either a ``RegularizedState`` or an array whose last axis
    holds ``(x, y, w)`` (9 entries); ``x`` is the offset from the centre.
    """
    z = state.z if isinstance(state, RegularizedState) else np.asarray(state, dtype=float)
    x, y, w = z[..., 0:3], z[..., 3:6], z[..., 6:9]
    p = x + config.positions[centre]
    phi = np.asarray(pot.near_field_remainder(config, centre, p))
    gphi = pot.near_field_gradient(config, centre, p)
    xx = np.einsum("...k,...k->...", x, x)
    xy = np.einsum("...k,...k->...", x, y)
    xg = np.einsum("...k,...k->...", x, gphi)
    f2 = w + xx[..., None] * gphi
    f3 = xy[..., None] * gphi + (2 * phi + xg)[..., None] * y
    return y.copy(), f2, f3


@dataclass
class RegularizedState:
    """Regularized variables around one centre: offset ``x``, ``y = dx/dtau`` and ``w``."""

    tau: float
    x: np.ndarray
    y: np.ndarray
    w: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.x, self.y, self.w])

    @classmethod
    def from_physical(cls, position, velocity, config, centre: int = 0, tau: float = 0.0) -> "RegularizedState":
        _require_kepler_exponent(config)
        x = np.asarray(position, float) - config.positions[centre]
        r = np.linalg.norm(x)
        if r == 0.0:
            raise CollisionEvaluation("state sits on the centre")
        y = r * np.asarray(velocity, float)
        rdot = x @ y / r
        w = (rdot * y - config.masses[centre] * x) / r
        return cls(float(tau), x, y, w)

    def to_physical(self, config, centre: int = 0):
        r = np.linalg.norm(self.x)
        if r == 0.0:
            raise CollisionEvaluation("state sits on the centre")
        return self.x + config.positions[centre], self.y / r

    def consistency(self, config, centre: int = 0) -> float:
        """Defect of ``w`` against its definition from ``(x, y)``."""
        r = np.linalg.norm(self.x)
        w = ((self.x @ self.y / r) * self.y - config.masses[centre] * self.x) / r
        return float(np.max(np.abs(w - self.w)))


@dataclass
class RegularizedPassage:
    trajectory: ps.TrueTimeTrajectory
    tau: np.ndarray
    z: np.ndarray  # (len(tau), 9)
    closest_tau: float
    closest_time: float
    closest_distance: float
    w_closest: np.ndarray
    entry_time: float
    exit_time: float


def _flat_sperling(config, centre):
    def rhs(tau, u):
        f1, f2, f3 = sperling_field(u[:9], config, centre)
        r = np.linalg.norm(u[:3])
        return np.concatenate([f1, f2, f3, [r]])

    return rhs


def regularized_passage(
    trajectory: ps.TrueTimeTrajectory,
    config,
    centre: int = 0,
    delta_star: float = 0.5,
    rtol: float = 1e-12,
    samples: int = 801,
) -> RegularizedPassage:
    """Carry a zero-energy trajectory through a (near-)collision with ``centre``.

    The hand-off happens at the last sample before closest approach with
    distance at least ``delta_star / 10``; the regularized flow runs, with
    physical time recovered from ``dt/dtau = |x|``, until the distance
    exceeds twice the hand-off radius.  Beyond that the physical equation is
    integrated to the final time of the input.
    """
    _require_kepler_exponent(config)
    c = config.positions[centre]
    dist = np.linalg.norm(trajectory.x - c, axis=1)
    handoff = delta_star / 10
    k_min = int(np.argmin(dist))
    if dist[k_min] >= handoff:
        raise ValueError(f"trajectory stays {dist[k_min]:.3g} away from the centre, above the hand-off radius")
    before = np.nonzero(dist[: k_min + 1] >= handoff)[0]
    if len(before) == 0:
        raise ValueError("trajectory starts inside the hand-off radius")
    k0 = int(before[-1])
    t0 = float(trajectory.t[k0])
    z0 = RegularizedState.from_physical(trajectory.x[k0], trajectory.v[k0], config, centre).z
    rhs = _flat_sperling(config, centre)

    def leave(tau, u):
        return np.linalg.norm(u[:3]) - 2 * handoff

    leave.terminal = True
    leave.direction = 1

    def turn(tau, u):
        return u[0:3] @ u[3:6]

    turn.direction = 1
    # tau needed to reach the centre and back is at most of order handoff / min |y|
    tau_max = 1e3 * max(1.0, 4 * handoff / max(np.linalg.norm(z0[3:6]) / max(dist[k0], 1e-300), 1e-12))
    sol = solve_ivp(rhs, (0.0, tau_max), np.concatenate([z0, [t0]]), method="DOP853", rtol=rtol,
                    atol=rtol * 1e-2, events=(leave, turn), dense_output=True)
    if sol.status != 1 or len(sol.t_events[0]) == 0:
        raise NumericalError(f"regularized integration did not leave the hand-off ball: {sol.message}")
    tau_exit = float(sol.t_events[0][0])
    taus = np.linspace(0.0, tau_exit, samples)
    U = sol.sol(taus).T
    if len(sol.t_events[1]):
        tau_c = float(sol.t_events[1][0])
    else:
        tau_c = float(taus[np.argmin(np.linalg.norm(U[:, :3], axis=1))])
    uc = sol.sol(tau_c)
    t_exit = float(U[-1, 9])

    r = np.linalg.norm(U[:, :3], axis=1)
    inner_t, inner_x = U[:, 9], U[:, :3] + c
    with np.errstate(divide="ignore", invalid="ignore"):
        inner_v = U[:, 3:6] / r[:, None]
    ok = r > 0
    # continue with the physical equation to the original final time
    t_end = float(trajectory.t[-1])
    ts, xs, vs = [trajectory.t[:k0]], [trajectory.x[:k0]], [trajectory.v[:k0]]
    ts.append(inner_t[ok])
    xs.append(inner_x[ok])
    vs.append(inner_v[ok])
    if t_end > t_exit:
        mod = ps.StrongForceModifier(0.0)
        rhs_t = _ode_rhs(mod, config)
        later = trajectory.t[trajectory.t > t_exit]
        out = solve_ivp(rhs_t, (t_exit, t_end), np.concatenate([inner_x[-1], inner_v[-1]]), method="DOP853",
                        rtol=rtol, atol=rtol * 1e-2, t_eval=later, args=(1.0,))
        if not out.success:
            raise NumericalError(f"outer integration failed: {out.message}")
        ts.append(out.t)
        xs.append(out.y[:3].T)
        vs.append(out.y[3:].T)
    traj = ps.TrueTimeTrajectory(np.concatenate(ts), np.vstack(xs), np.vstack(vs), trajectory.omega, trajectory.beta)
    return RegularizedPassage(
        trajectory=traj,
        tau=taus,
        z=U[:, :9],
        closest_tau=tau_c,
        closest_time=float(uc[9]),
        closest_distance=float(np.linalg.norm(uc[:3])),
        w_closest=uc[6:9].copy(),
        entry_time=t0,
        exit_time=t_exit,
    )


@dataclass
class BlowUp:
    t: np.ndarray
    v: np.ndarray
    vdot: np.ndarray
    delta: float
    time_of_approach: float
    residual: float
    energy_defect: np.ndarray


def blow_up_rescale(trajectory: ps.TrueTimeTrajectory, config, centre: int = 0) -> BlowUp:
    """Zoom on the closest approach to ``centre``: ``v(s) = (x(delta^(1+alpha/2) s + t_c) - c) / delta``.

    ``residual`` is the sup over samples of the defect of ``v`` against the
    homogeneous one-centre equation; ``energy_defect`` is
    ``|v'|^2 / 2 - m / (alpha |v|^alpha)``.
    """
    from scipy.optimize import minimize_scalar

    c = config.positions[centre]
    a, m = config.alpha, config.masses[centre]
    spl = trajectory.interpolator()
    d = np.linalg.norm(trajectory.x - c, axis=1)
    k = int(np.argmin(d))
    lo, hi = trajectory.t[max(k - 1, 0)], trajectory.t[min(k + 1, len(d) - 1)]
    res = minimize_scalar(lambda s: np.linalg.norm(spl(s) - c), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-14 * max(1.0, abs(hi))})
    tc = float(res.x) if res.fun < d[k] else float(trajectory.t[k])
    xc = spl(tc) if res.fun < d[k] else trajectory.x[k]
    delta = float(np.linalg.norm(xc - c))
    scale = delta ** (1 + a / 2)
    t = np.concatenate([trajectory.t[:k + 1][trajectory.t[:k + 1] < tc], [tc], trajectory.t[k:][trajectory.t[k:] > tc]])
    x = spl(t)
    x[t == tc] = xc
    xd = spl(t, 1)
    s = (t - tc) / scale
    v = (x - c) / delta
    vdot = xd * delta ** (a / 2)
    vdd = delta ** (1 + a) * pot.eval_gradV(config, x)
    rv = np.linalg.norm(v, axis=1)
    hom = -m * v / rv[:, None] ** (a + 2)
    residual = float(np.max(np.linalg.norm(vdd - hom, axis=1)))
    energy = 0.5 * np.einsum("ij,ij->i", vdot, vdot) - m / (a * rv**a)
    return BlowUp(s, v, vdot, delta, tc, residual, energy)
