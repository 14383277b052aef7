"""The N-centre potential, its splittings and grid-certified constants.

The potential is ``V(x) = sum_i m_i / (alpha |x - c_i|^alpha)`` and the
equation of motion is ``x'' = grad V(x)``.  All evaluators accept a single
point of shape ``(3,)`` or a stack of points of shape ``(..., 3)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CertificationFailure, CollisionEvaluation, InvalidConfiguration

COLLISION_EPS = 1e-13


@dataclass(frozen=True)
class CentreConfiguration:
    alpha: float
    positions: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        mass = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise InvalidConfiguration(f"centre positions must be (N, 3), got {pos.shape}")
        if mass.shape != (pos.shape[0],):
            raise InvalidConfiguration("one mass per centre is required")
        if not np.all(mass > 0):
            raise InvalidConfiguration("masses must be strictly positive")
        if not (1.0 <= self.alpha < 2.0):
            raise InvalidConfiguration(f"alpha must lie in [1, 2), got {self.alpha}")
        for i in range(len(pos)):
            for j in range(i + 1, len(pos)):
                if np.linalg.norm(pos[i] - pos[j]) == 0.0:
                    raise InvalidConfiguration(f"centres {i} and {j} coincide")
        pos.setflags(write=False)
        mass.setflags(write=False)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "masses", mass)

    @classmethod
    def from_centres(cls, alpha, centres):
        """Build from ``[(pos, mass), ...]`` or ``[{"pos": ..., "mass": ...}, ...]``."""
        pos, mass = [], []
        for c in centres:
            if isinstance(c, dict):
                pos.append(c["pos"])
                mass.append(c["mass"])
            else:
                pos.append(c[0])
                mass.append(c[1])
        return cls(alpha, np.array(pos, dtype=float), np.array(mass, dtype=float))

    @property
    def n_centres(self) -> int:
        return len(self.masses)

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    @property
    def xi(self) -> float:
        """Largest distance of a centre from the origin."""
        return float(np.max(np.linalg.norm(self.positions, axis=1)))

    def centroid(self) -> np.ndarray:
        return self.masses @ self.positions / self.total_mass

    def scaled_masses(self, factor: float) -> "CentreConfiguration":
        return CentreConfiguration(self.alpha, self.positions, self.masses * factor)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "centres": [
                {"pos": [float(v) for v in p], "mass": float(m)}
                for p, m in zip(self.positions, self.masses)
            ],
        }


def normalize(config: CentreConfiguration) -> CentreConfiguration:
    """Translate the centres so that the mass-weighted centroid is the origin."""
    shift = config.centroid()
    return CentreConfiguration(config.alpha, config.positions - shift, config.masses)


def _offsets(config, x):
    x = np.asarray(x, dtype=float)
    d = x[..., None, :] - config.positions  # (..., N, 3)
    r = np.sqrt(np.einsum("...k,...k->...", d, d))
    return x, d, r


def _check_collision(r, skip=None):
    rr = r if skip is None else np.delete(r, skip, axis=-1)
    if rr.size and np.min(rr) < COLLISION_EPS:
        raise CollisionEvaluation("potential evaluated at a centre")


def eval_V(config: CentreConfiguration, x) -> np.ndarray | float:
    _, _, r = _offsets(config, x)
    _check_collision(r)
    v = np.sum(config.masses / (config.alpha * r**config.alpha), axis=-1)
    return float(v) if np.ndim(v) == 0 else v


def eval_gradV(config: CentreConfiguration, x) -> np.ndarray:
    _, d, r = _offsets(config, x)
    _check_collision(r)
    coef = -config.masses * r ** (-config.alpha - 2)
    return np.einsum("...i,...ik->...k", coef, d)


def eval_hessV(config: CentreConfiguration, x) -> np.ndarray:
    _, d, r = _offsets(config, x)
    _check_collision(r)
    a = config.alpha
    coef = config.masses * r ** (-a - 2)
    outer = np.einsum("...ik,...il->...ikl", d, d) / (r**2)[..., None, None]
    eye = np.eye(3)
    return np.einsum("...i,...ikl->...kl", coef, (a + 2) * outer - eye)


def far_field_remainder(config: CentreConfiguration, x):
    """``W(x) = V(x) - m/(alpha |x|^alpha)`` and its gradient."""
    x = np.asarray(x, dtype=float)
    rx = np.linalg.norm(x, axis=-1)
    if np.min(rx) == 0.0:
        raise CollisionEvaluation("far-field splitting is singular at the origin")
    a, m = config.alpha, config.total_mass
    W = eval_V(config, x) - m / (a * rx**a)
    gW = eval_gradV(config, x) + (m * rx ** (-a - 2))[..., None] * x
    return W, gW


def near_field_remainder(config: CentreConfiguration, i: int, x):
    """``Phi_i(x) = V(x) - m_i/(alpha |x - c_i|^alpha)``, smooth at ``c_i``."""
    _, _, r = _offsets(config, x)
    _check_collision(r, skip=i)
    a = config.alpha
    terms = config.masses / (a * np.where(r > 0, r, 1.0) ** a)
    phi = np.sum(np.delete(terms, i, axis=-1), axis=-1)
    return float(phi) if np.ndim(phi) == 0 else phi


def near_field_gradient(config: CentreConfiguration, i: int, x) -> np.ndarray:
    _, d, r = _offsets(config, x)
    _check_collision(r, skip=i)
    others = [j for j in range(config.n_centres) if j != i]
    coef = -config.masses[others] * r[..., others] ** (-config.alpha - 2)
    return np.einsum("...i,...ik->...k", coef, d[..., others, :])


# ---------------------------------------------------------------------------
# certified constants


@dataclass(frozen=True)
class CertificateEntry:
    inequality: str
    resolution: str
    margin: float


@dataclass(frozen=True)
class PotentialConstants:
    delta_star: float
    K: float
    C_minus: float
    C_plus: float
    certificate: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "delta_star": self.delta_star,
            "K": self.K,
            "C_minus": self.C_minus,
            "C_plus": self.C_plus,
            "certificate": [
                {"inequality": e.inequality, "resolution": e.resolution, "margin": e.margin}
                for e in self.certificate
            ],
        }


def sphere_grid(n_theta: int = 32, n_phi: int = 64) -> np.ndarray:
    """Unit vectors on a product grid (cell-centred in polar angle)."""
    th = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    ph = np.arange(n_phi) * 2 * np.pi / n_phi
    T, P = np.meshgrid(th, ph, indexing="ij")
    return np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1).reshape(-1, 3)


def _shell_samples(K, dirs, n_radii):
    radii = np.geomspace(K, 10 * K, n_radii)
    return radii[:, None, None] * dirs[None], radii


def _far_quantities(config, pts):
    r = np.linalg.norm(pts, axis=-1)
    W, gW = far_field_remainder(config, pts)
    V = eval_V(config, pts)
    gWx = np.einsum("...k,...k->...", gW, pts)
    return r, V, W, np.linalg.norm(gW, axis=-1), gWx


def _delta_star(config, dirs, n_radii):
    a = config.alpha
    pos, mass = config.positions, config.masses
    cap = 1.0
    if config.n_centres > 1:
        dmin = min(
            np.linalg.norm(pos[i] - pos[j])
            for i in range(config.n_centres)
            for j in range(i + 1, config.n_centres)
        )
        cap = min(cap, dmin / 4)

    def margins(delta):
        m2, m3 = np.inf, np.inf
        for i in range(config.n_centres):
            radii = delta * np.geomspace(1e-4, 1.0, n_radii)
            pts = pos[i] + radii[:, None, None] * dirs[None]
            off = pts - pos[i]
            phi_c = near_field_remainder(config, i, pos[i])
            gphi = near_field_gradient(config, i, pts)
            lhs2 = (2 - a) / a * mass[i] / radii[:, None] ** a + 2 * phi_c + np.einsum(
                "...k,...k->...", gphi, off
            )
            m2 = min(m2, float(np.min(lhs2 / ((2 - a) / a * mass[i] / radii[:, None] ** a))))
            rhs3 = 3 * mass[i] / (2 * a * radii[:, None] ** a)
            m3 = min(m3, float(np.min((rhs3 - eval_V(config, pts)) / rhs3)))
        return m2, m3

    if min(margins(cap)) > 0:
        return cap, margins(cap)
    lo, hi = 0.0, cap
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if min(margins(mid)) > 0:
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        raise CertificationFailure("no admissible delta* found")
    return lo, margins(lo)


def certify_constants(
    config: CentreConfiguration,
    resolution: tuple[int, int, int] = (32, 64, 64),
    eps: float = 1e-3,
    growth: float = 2 ** 0.125,
) -> PotentialConstants:
    """Grid-certify delta*, K, C- and C+ for a normalized configuration.

    K is the first point of the geometric grid ``(Xi+1)(1+eps) growth^j``
    for which the far-field inequality with no free constant holds on the
    shell ``[K, 10K]``; C+ and C- then get a factor 2 (resp. 0.5) of slack
    over the sampled extremes.
    """
    if np.linalg.norm(config.centroid()) > 1e-12 * max(1.0, config.xi):
        raise InvalidConfiguration("configuration must be normalized first")
    n_theta, n_phi, n_radii = resolution
    dirs = sphere_grid(n_theta, n_phi)
    a, m = config.alpha, config.total_mass
    res = f"{n_theta}x{n_phi}x{n_radii}"

    base = (config.xi + 1.0) * (1.0 + eps)
    cap = 1e4 * (config.xi + 1.0)
    K = base
    while True:
        pts, _ = _shell_samples(K, dirs, n_radii)
        r, V, W, gWn, gWx = _far_quantities(config, pts)
        lhs = 2 * np.abs(W) + np.abs(gWx)
        rhs = (2 - a) * m / (4 * a) / r**a
        if np.all(lhs < rhs):
            break
        K *= growth
        if K > cap:
            raise CertificationFailure(f"no K below {cap:g} satisfies the far-field bound")

    sqrt_lead = np.sqrt(m / a) / r ** (a / 2)
    need = max(
        float(np.max(np.abs(W) * r ** (a + 2))),
        float(np.max(gWn * r ** (a + 3))),
        float(np.max(V * r**a)),
        float(np.max(np.abs(np.sqrt(V) - sqrt_lead) * r ** (2 + a / 2))),
    )
    C_plus = 2.0 * need
    C_minus = 0.5 * float(np.min(V * r**a))

    def rel(rhs_, lhs_):
        return float(np.min((rhs_ - lhs_) / rhs_))

    cert = [
        CertificateEntry("far_remainder_bound", res, rel(C_plus / r ** (a + 2), np.abs(W))),
        CertificateEntry("far_gradient_bound", res, rel(C_plus / r ** (a + 3), gWn)),
        CertificateEntry("virial_remainder_bound", res, rel(rhs, lhs)),
        CertificateEntry("potential_lower", res, rel(V, C_minus / r**a)),
        CertificateEntry("potential_upper", res, rel(C_plus / r**a, V)),
        CertificateEntry(
            "sqrt_potential_lower", res, rel(np.sqrt(V), sqrt_lead - C_plus / r ** (2 + a / 2))
        ),
        CertificateEntry(
            "sqrt_potential_upper", res, rel(sqrt_lead + C_plus / r ** (2 + a / 2), np.sqrt(V))
        ),
    ]
    delta, (m2, m3) = _delta_star(config, dirs, 16)
    cert += [
        CertificateEntry("near_virial_lower", f"{n_theta}x{n_phi}x16", m2),
        CertificateEntry("near_potential_upper", f"{n_theta}x{n_phi}x16", m3),
    ]
    return PotentialConstants(delta, K, C_minus, C_plus, tuple(cert))
