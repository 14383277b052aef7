"""Discrete fixed-endpoint paths and the Maupertuis functional.

A path is sampled at parameter values ``t_0 = -1 < t_1 < ... < t_n = 1``
(uniform by default).  The discrete functional is

    M_beta(u) = (sum_k |u_{k+1} - u_k|^2 / dt_k) * (sum_k w_k V_beta(u_k))

with trapezoid weights ``w_k``; its gradient and Hessian below are exact
derivatives of this discrete expression, so Newton and descent methods see a
consistent objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import potential as pot
from .errors import CollisionPath, DegeneratePath, UnresolvedDegree

COLLISION_THRESHOLD = 1e-6
MIN_NODES = 16


def uniform_times(n: int) -> np.ndarray:
    return np.linspace(-1.0, 1.0, n + 1)


def stretched_times(n: int, stretch: float) -> np.ndarray:
    """``t = sinh(a s) / sinh(a)`` on a uniform ``s`` grid; ``a -> 0`` is uniform.

    Resolution near ``t = 0`` improves by roughly ``sinh(a)/a``.
    """
    s = np.linspace(-1.0, 1.0, n + 1)
    if stretch < 1e-8:
        return s
    t = np.sinh(stretch * s) / np.sinh(stretch)
    t[0], t[-1] = -1.0, 1.0
    return t


@dataclass(frozen=True)
class DiscretePath:
    nodes: np.ndarray
    times: np.ndarray = None

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 3:
            raise ValueError("nodes must have shape (n+1, 3)")
        n = nodes.shape[0] - 1
        if n < MIN_NODES:
            raise ValueError(f"need at least {MIN_NODES} intervals, got {n}")
        times = uniform_times(n) if self.times is None else np.array(self.times, dtype=float)
        if times.shape != (n + 1,) or not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing with one entry per node")
        if abs(times[0] + 1) > 1e-14 or abs(times[-1] - 1) > 1e-14:
            raise ValueError("times must span [-1, 1]")
        nodes.setflags(write=False)
        times.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "times", times)

    @property
    def n(self) -> int:
        return self.nodes.shape[0] - 1

    @property
    def q_minus(self) -> np.ndarray:
        return self.nodes[0]

    @property
    def q_plus(self) -> np.ndarray:
        return self.nodes[-1]

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]

    def with_interior(self, interior) -> "DiscretePath":
        nodes = self.nodes.copy()
        nodes[1:-1] = np.asarray(interior).reshape(-1, 3)
        return DiscretePath(nodes, self.times)

    @classmethod
    def straight(cls, q_minus, q_plus, n: int, times=None) -> "DiscretePath":
        t = uniform_times(n) if times is None else np.asarray(times)
        lam = (t + 1) / 2
        nodes = (1 - lam)[:, None] * np.asarray(q_minus, float) + lam[:, None] * np.asarray(q_plus, float)
        return cls(nodes, t)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "q_minus": self.q_minus.tolist(),
            "q_plus": self.q_plus.tolist(),
            "times": self.times.tolist(),
            "nodes": self.nodes.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "DiscretePath":
        return cls(np.array(d["nodes"]), np.array(d["times"]) if "times" in d else None)


def trapezoid_weights(times: np.ndarray) -> np.ndarray:
    dt = np.diff(times)
    w = np.zeros_like(times)
    w[:-1] += dt / 2
    w[1:] += dt / 2
    return w


# ---------------------------------------------------------------------------
# strong-force modification


def smoothstep5(z):
    z = np.clip(z, 0.0, 1.0)
    return z**3 * (10 - 15 * z + 6 * z**2)


@dataclass(frozen=True)
class StrongForceModifier:
    """``V_beta = V + beta U`` with ``U = sum m_i Psi(|x-c_i|^2) / (2|x-c_i|^2)``.

    ``Psi`` is 1 on ``[0, delta*]``, 0 on ``[2 delta*, inf)`` and a quintic
    smoothstep in between; it is applied to the squared distance.
    """

    beta: float = 0.0
    delta_star: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.beta <= 1.0):
            raise ValueError("beta must lie in [0, 1]")
        if self.delta_star <= 0:
            raise ValueError("delta_star must be positive")

    @property
    def support_radius(self) -> float:
        """Distance from a centre beyond which ``U`` vanishes identically."""
        return float(np.sqrt(2 * self.delta_star))

    def psi(self, s, order: int = 0):
        d = self.delta_star
        z = (np.asarray(s, dtype=float) - d) / d
        inside = (z > 0) & (z < 1)
        zc = np.clip(z, 0.0, 1.0)
        if order == 0:
            return np.clip(1.0 - smoothstep5(z), 0.0, 1.0)
        if order == 1:
            return np.where(inside, -30 * zc**2 * (zc - 1) ** 2 / d, 0.0)
        if order == 2:
            return np.where(inside, -60 * zc * (2 * zc - 1) * (zc - 1) / d**2, 0.0)
        raise ValueError("order must be 0, 1 or 2")

    def _g(self, s, mass):
        # g(s) = m Psi(s) / (2 s) and its first two derivatives in s = |x-c|^2
        p0, p1, p2 = self.psi(s), self.psi(s, 1), self.psi(s, 2)
        g0 = mass * p0 / (2 * s)
        g1 = mass * (p1 / (2 * s) - p0 / (2 * s**2))
        g2 = mass * (p2 / (2 * s) - p1 / s**2 + p0 / s**3)
        return g0, g1, g2

    def U_terms(self, config, x):
        _, d, r = pot._offsets(config, x)
        pot._check_collision(r)
        s = r**2
        g0, g1, g2 = self._g(s, config.masses)
        return d, g0, g1, g2

    def U(self, config, x):
        _, g0, _, _ = self.U_terms(config, x)
        return np.sum(g0, axis=-1)

    def gradU(self, config, x):
        d, _, g1, _ = self.U_terms(config, x)
        return np.einsum("...i,...ik->...k", 2 * g1, d)

    def hessU(self, config, x):
        d, _, g1, g2 = self.U_terms(config, x)
        outer = np.einsum("...ik,...il->...ikl", d, d)
        return np.einsum("...i,...ikl->...kl", 4 * g2, outer) + np.sum(2 * g1, axis=-1)[
            ..., None, None
        ] * np.eye(3)

    def V(self, config, x):
        v = pot.eval_V(config, x)
        return v + self.beta * self.U(config, x) if self.beta else v

    def gradV(self, config, x):
        g = pot.eval_gradV(config, x)
        return g + self.beta * self.gradU(config, x) if self.beta else g

    def hessV(self, config, x):
        h = pot.eval_hessV(config, x)
        return h + self.beta * self.hessU(config, x) if self.beta else h


# ---------------------------------------------------------------------------
# Maupertuis functional


def min_collision_distance(path_nodes: np.ndarray, config) -> float:
    """Smallest distance to a centre over nodes and segment midpoints."""
    mids = 0.5 * (path_nodes[1:] + path_nodes[:-1])
    pts = np.concatenate([path_nodes, mids])
    d = np.linalg.norm(pts[:, None, :] - config.positions[None], axis=-1)
    return float(d.min())


def segment_distances(path_nodes: np.ndarray, config) -> np.ndarray:
    """Exact distance from each centre to the polyline, shape ``(N,)``."""
    a, b = path_nodes[:-1], path_nodes[1:]
    ab = b - a
    L2 = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300)
    out = []
    for c in config.positions:
        lam = np.clip(np.einsum("ij,ij->i", c - a, ab) / L2, 0.0, 1.0)
        p = a + lam[:, None] * ab
        out.append(np.min(np.linalg.norm(p - c, axis=1)))
    return np.array(out)


def _check_path(path, config, threshold=COLLISION_THRESHOLD):
    if min_collision_distance(path.nodes, config) <= threshold:
        raise CollisionPath("path comes within the collision threshold of a centre")


def maupertuis_parts(path: DiscretePath, modifier: StrongForceModifier, config):
    """Kinetic and potential factors ``(sum |du|^2/dt, sum w V_beta)``."""
    _check_path(path, config)
    du = np.diff(path.nodes, axis=0)
    dt = np.diff(path.times)
    kin = float(np.sum(np.einsum("ij,ij->i", du, du) / dt))
    w = trapezoid_weights(path.times)
    potv = float(np.dot(w, modifier.V(config, path.nodes)))
    return kin, potv


def maupertuis_value(path: DiscretePath, modifier: StrongForceModifier, config) -> float:
    kin, potv = maupertuis_parts(path, modifier, config)
    return kin * potv


def _kin_grad(path):
    du = np.diff(path.nodes, axis=0) / np.diff(path.times)[:, None]
    g = np.zeros_like(path.nodes)
    g[1:] += 2 * du
    g[:-1] -= 2 * du
    return g


def maupertuis_gradient(path: DiscretePath, modifier: StrongForceModifier, config) -> np.ndarray:
    """Gradient w.r.t. all nodes, shape ``(n+1, 3)``; endpoint rows are zero."""
    kin, potv = maupertuis_parts(path, modifier, config)
    w = trapezoid_weights(path.times)
    g = potv * _kin_grad(path) + kin * w[:, None] * modifier.gradV(config, path.nodes)
    g[0] = 0.0
    g[-1] = 0.0
    return g


@dataclass
class HessianParts:
    """Structured Hessian: block-tridiagonal part plus a symmetric rank-2 term.

    ``H = pot * 2 (L kron I3) + kin * blockdiag(w_k hess V_beta) + a b^T + b a^T``
    restricted to interior nodes.
    """

    kin: float
    potv: float
    lap_diag: np.ndarray  # (n-1,)
    lap_off: np.ndarray  # (n-2,)
    blocks: np.ndarray  # (n-1, 3, 3) includes kin * w_k * hess V
    a: np.ndarray  # grad of kin (flattened interior)
    b: np.ndarray  # grad of pot (flattened interior)

    @property
    def size(self) -> int:
        return 3 * len(self.lap_diag)

    def dense(self) -> np.ndarray:
        m = len(self.lap_diag)
        H = np.zeros((3 * m, 3 * m))
        eye = np.eye(3)
        for k in range(m):
            H[3 * k : 3 * k + 3, 3 * k : 3 * k + 3] = 2 * self.potv * self.lap_diag[k] * eye + self.blocks[k]
        for k in range(m - 1):
            blk = 2 * self.potv * self.lap_off[k] * eye
            H[3 * k : 3 * k + 3, 3 * k + 3 : 3 * k + 6] = blk
            H[3 * k + 3 : 3 * k + 6, 3 * k : 3 * k + 3] = blk
        H += np.outer(self.a, self.b) + np.outer(self.b, self.a)
        return H

    def banded(self) -> np.ndarray:
        """Symmetric upper banded storage (bandwidth 5) of the sparse part."""
        m = len(self.lap_diag)
        N = 3 * m
        ab = np.zeros((6, N))
        diag = np.zeros(N)
        for k in range(m):
            blk = self.blocks[k] + 2 * self.potv * self.lap_diag[k] * np.eye(3)
            i0 = 3 * k
            for p in range(3):
                for q in range(p, 3):
                    ab[5 - (q - p), i0 + q] = blk[p, q]
        for k in range(m - 1):
            for p in range(3):
                i, j = 3 * k + p, 3 * k + 3 + p
                ab[5 - (j - i), j] = 2 * self.potv * self.lap_off[k]
        return ab

    def matvec(self, v: np.ndarray) -> np.ndarray:
        V = v.reshape(-1, 3)
        out = np.einsum("kij,kj->ki", self.blocks, V) + 2 * self.potv * self.lap_diag[:, None] * V
        out[:-1] += 2 * self.potv * self.lap_off[:, None] * V[1:]
        out[1:] += 2 * self.potv * self.lap_off[:, None] * V[:-1]
        out = out.ravel()
        return out + self.a * (self.b @ v) + self.b * (self.a @ v)


def maupertuis_hessian_parts(path: DiscretePath, modifier: StrongForceModifier, config) -> HessianParts:
    kin, potv = maupertuis_parts(path, modifier, config)
    dt = np.diff(path.times)
    inv = 1.0 / dt
    lap_diag = inv[:-1] + inv[1:]
    lap_off = -inv[1:-1]
    w = trapezoid_weights(path.times)
    inner = path.nodes[1:-1]
    blocks = kin * w[1:-1, None, None] * modifier.hessV(config, inner)
    a = _kin_grad(path)[1:-1].ravel()
    b = (w[:, None] * modifier.gradV(config, path.nodes))[1:-1].ravel()
    return HessianParts(kin, potv, lap_diag, lap_off, blocks, a, b)


def maupertuis_hessian(path: DiscretePath, modifier: StrongForceModifier, config) -> np.ndarray:
    """Dense symmetric Hessian w.r.t. interior nodes, ``3(n-1)`` square."""
    return maupertuis_hessian_parts(path, modifier, config).dense()


def omega_of(path: DiscretePath, modifier: StrongForceModifier, config) -> float:
    kin, potv = maupertuis_parts(path, modifier, config)
    if kin <= 0.0:
        raise DegeneratePath("zero kinetic integral")
    return float(np.sqrt(kin / (2 * potv)))


# ---------------------------------------------------------------------------
# true-time trajectories


@dataclass
class TrueTimeTrajectory:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    omega: float
    beta: float = 0.0
    residual: np.ndarray = field(default=None)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.v = np.asarray(self.v, dtype=float)

    def compute_residual(self, config, modifier: StrongForceModifier | None = None):
        Vb = (modifier or StrongForceModifier(0.0)).V(config, self.x)
        self.residual = 0.5 * np.einsum("ij,ij->i", self.v, self.v) - Vb
        return self.residual

    @property
    def radius(self) -> np.ndarray:
        return np.linalg.norm(self.x, axis=1)

    def shifted(self, dt: float) -> "TrueTimeTrajectory":
        """Trajectory re-labelled so that old time ``t`` becomes ``t - dt``."""
        return TrueTimeTrajectory(self.t - dt, self.x, self.v, self.omega, self.beta, self.residual)

    def interpolator(self):
        from scipy.interpolate import CubicHermiteSpline

        return CubicHermiteSpline(self.t, self.x, self.v, axis=0)


def to_true_time(
    path: DiscretePath, modifier: StrongForceModifier, config, oversample: int = 8
) -> TrueTimeTrajectory:
    """Reparameterize ``x(t) = u(t/omega)`` on ``[-omega, omega]`` via a cubic spline."""
    omega = omega_of(path, modifier, config)
    tau = omega * path.times
    spline = CubicSpline(tau, path.nodes, axis=0)
    fine = [tau[:1]]
    for k in range(path.n):
        fine.append(np.linspace(tau[k], tau[k + 1], oversample + 1)[1:])
    ts = np.concatenate(fine)
    x = spline(ts)
    x[0], x[-1] = path.q_minus, path.q_plus
    traj = TrueTimeTrajectory(ts, x, spline(ts, 1), omega, modifier.beta)
    traj.compute_residual(config, modifier)
    return traj


def action_value(trajectory: TrueTimeTrajectory, config) -> float:
    """Trapezoid quadrature of ``|x'|^2/2 + V(x)`` over the samples."""
    lag = 0.5 * np.einsum("ij,ij->i", trajectory.v, trajectory.v) + pot.eval_V(config, trajectory.x)
    return float(np.trapezoid(lag, trajectory.t))


# ---------------------------------------------------------------------------
# loops and degrees


@dataclass(frozen=True)
class PathLoop:
    """Closed family of paths sampled at ``s_j = 2 pi j / M``."""

    members: np.ndarray  # (M, n+1, 3)
    times: np.ndarray

    def __post_init__(self):
        mem = np.array(self.members, dtype=float)
        if mem.ndim != 3 or mem.shape[2] != 3:
            raise ValueError("members must have shape (M, n+1, 3)")
        if mem.shape[0] < 8:
            raise ValueError("a loop needs at least 8 members")
        if not (np.allclose(mem[:, 0], mem[0, 0], atol=0) and np.allclose(mem[:, -1], mem[0, -1], atol=0)):
            raise ValueError("loop members must share endpoints")
        times = np.asarray(self.times, dtype=float)
        if times.shape != (mem.shape[1],):
            raise ValueError("times must match the member length")
        object.__setattr__(self, "members", mem)
        object.__setattr__(self, "times", times)

    @property
    def size(self) -> int:
        return self.members.shape[0]

    def path(self, j: int) -> DiscretePath:
        return DiscretePath(self.members[j % self.size], self.times)

    @classmethod
    def from_paths(cls, paths) -> "PathLoop":
        paths = list(paths)
        return cls(np.stack([p.nodes for p in paths]), paths[0].times)

    def to_dict(self) -> dict:
        return {"times": self.times.tolist(), "members": self.members.tolist()}


def solid_angle(a, b, c) -> np.ndarray:
    """Signed solid angle of triangles ``(a, b, c)`` seen from the origin."""
    la, lb, lc = (np.linalg.norm(v, axis=-1) for v in (a, b, c))
    num = np.einsum("...k,...k->...", a, np.cross(b, c))
    den = (
        la * lb * lc
        + np.einsum("...k,...k->...", a, b) * lc
        + np.einsum("...k,...k->...", a, c) * lb
        + np.einsum("...k,...k->...", b, c) * la
    )
    return 2.0 * np.arctan2(num, den)


def surface_degree(members: np.ndarray, centre: np.ndarray) -> float:
    """Un-rounded degree of the triangulated ``(s, t)`` surface around ``centre``."""
    P = members - centre
    Q = np.roll(P, -1, axis=0)
    a, b, c, d = P[:, :-1], Q[:, :-1], Q[:, 1:], P[:, 1:]
    total = solid_angle(a, b, c).sum() + solid_angle(a, c, d).sum()
    return float(total / (4 * np.pi))


def loop_degrees(loop: PathLoop, config, centres=(0, 1), guard: float = 0.1):
    """Degrees of the normalized maps around two designated centres."""
    out = []
    for i in centres:
        raw = surface_degree(loop.members, config.positions[i])
        k = int(np.rint(raw))
        if abs(raw - k) >= guard:
            raise UnresolvedDegree(f"degree around centre {i} not resolved: {raw:.4f}")
        out.append(k)
    return tuple(out)


def segment_hits(path_nodes: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Distance between the polyline and the segment ``[a, b]``."""
    p0, p1 = path_nodes[:-1], path_nodes[1:]
    best = np.inf
    d1 = p1 - p0
    d2 = b - a
    r = p0 - a
    A = np.einsum("ij,ij->i", d1, d1)
    E = d2 @ d2
    F = r @ d2
    C = np.einsum("ij,j->i", d1, d2)
    Dd = np.einsum("ij,ij->i", d1, r)
    den = A * E - C**2
    s = np.where(den > 1e-300, np.clip((C * F - Dd * E) / np.where(den > 1e-300, den, 1), 0, 1), 0.0)
    t = (C * s + F) / E
    t = np.clip(t, 0, 1)
    s = np.clip((C * t - Dd) / np.maximum(A, 1e-300), 0, 1)
    diff = p0 + s[:, None] * d1 - (a + t[:, None] * d2)
    best = np.min(np.linalg.norm(diff, axis=1))
    return float(best)
