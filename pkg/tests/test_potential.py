import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parabolica import potential as pot
from parabolica.errors import CollisionEvaluation, InvalidConfiguration

# K for the standard two-centre configuration, frozen from certify_constants
K_TWO_CENTRE = 9.52317057694179

finite = st.floats(-50, 50, allow_nan=False)
point = st.tuples(finite, finite, finite).map(np.array)


def _fd_grad(f, x, h=1e-6):
    g = np.zeros(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def test_rejects_bad_configurations():
    with pytest.raises(InvalidConfiguration):
        pot.CentreConfiguration(2.0, [[0, 0, 0]], [1.0])
    with pytest.raises(InvalidConfiguration):
        pot.CentreConfiguration(1.5, [[0, 0, 0]], [-1.0])
    with pytest.raises(InvalidConfiguration):
        pot.CentreConfiguration(1.5, [[1, 0, 0], [1, 0, 0]], [1.0, 1.0])


def test_collision_raises(two_centre):
    with pytest.raises(CollisionEvaluation):
        pot.eval_V(two_centre, [1.0, 0.0, 0.0])


def test_normalize_moves_centroid_to_origin():
    cfg = pot.CentreConfiguration.from_centres(1.2, [([2, 1, 0], 1.0), ([0, 1, 0], 3.0)])
    assert np.allclose(pot.normalize(cfg).centroid(), 0, atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(point)
def test_splitting_consistency(x):
    cfg = pot.CentreConfiguration.from_centres(1.5, [([1, 0, 0], 1.0), ([-1, 0, 0], 2.0)])
    dists = np.linalg.norm(x - cfg.positions, axis=1)
    if np.linalg.norm(x) < 1e-3 or dists.min() < 1e-3:
        return
    V = pot.eval_V(cfg, x)
    W, _ = pot.far_field_remainder(cfg, x)
    far = cfg.total_mass / (cfg.alpha * np.linalg.norm(x) ** cfg.alpha) + W
    assert abs(far - V) <= 1e-12 * V
    for i in range(2):
        near = cfg.masses[i] / (cfg.alpha * dists[i] ** cfg.alpha) + pot.near_field_remainder(cfg, i, x)
        assert abs(near - V) <= 1e-12 * V


@settings(max_examples=100, deadline=None)
@given(point)
def test_gradients_match_finite_differences(x):
    cfg = pot.CentreConfiguration.from_centres(1.25, [([1, 0, 0], 1.0), ([-1, 0, 0], 1.0)])
    if np.linalg.norm(x) < 0.1 or np.linalg.norm(x - cfg.positions, axis=1).min() < 0.1:
        return
    g = pot.eval_gradV(cfg, x)
    fd = _fd_grad(lambda y: pot.eval_V(cfg, y), x)
    assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(g) + 1e-12
    _, gW = pot.far_field_remainder(cfg, x)
    # W is a small difference far out; a step relative to |x| keeps round-off down
    fdW = _fd_grad(lambda y: pot.far_field_remainder(cfg, y)[0], x, h=1e-4 * np.linalg.norm(x))
    assert np.linalg.norm(gW - fdW) <= 1e-6 * np.linalg.norm(gW) + 1e-10 * np.linalg.norm(g)
    H = pot.eval_hessV(cfg, x)
    fdH = np.stack([_fd_grad(lambda y: pot.eval_gradV(cfg, y)[k], x) for k in range(3)])
    assert np.allclose(H, H.T)
    assert np.linalg.norm(H - fdH) <= 1e-5 * np.linalg.norm(H)


@settings(max_examples=100, deadline=None)
@given(point, st.floats(0.1, 10))
def test_single_centre_homogeneity(x, lam):
    if np.linalg.norm(x) < 1e-3:
        return
    cfg = pot.CentreConfiguration(1.7, [[0, 0, 0]], [2.0])
    assert pot.eval_V(cfg, lam * x) == pytest.approx(lam ** (-1.7) * pot.eval_V(cfg, x), rel=1e-13)


def test_certified_constants_two_centre(two_centre, two_centre_constants):
    c = two_centre_constants
    assert c.K == pytest.approx(K_TWO_CENTRE, rel=1e-12)
    assert c.delta_star == pytest.approx(0.5)
    assert 0 < c.C_minus < c.C_plus
    for entry in c.certificate:
        assert entry.margin > 0, entry.inequality


def test_certificate_inequalities_on_fresh_samples(two_centre, two_centre_constants):
    # sampled off the certification grid
    rng = np.random.default_rng(1)
    c = two_centre_constants
    a, m = two_centre.alpha, two_centre.total_mass
    d = rng.normal(size=(4000, 3))
    d /= np.linalg.norm(d, axis=1)[:, None]
    r = c.K * np.exp(rng.uniform(0, np.log(50), 4000))
    x = r[:, None] * d
    W, gW = pot.far_field_remainder(two_centre, x)
    V = pot.eval_V(two_centre, x)
    assert np.all(np.abs(W) <= c.C_plus / r ** (a + 2))
    assert np.all(np.linalg.norm(gW, axis=1) <= c.C_plus / r ** (a + 3))
    assert np.all(c.C_minus / r**a <= V) and np.all(V <= c.C_plus / r**a)
    virial = 2 * np.abs(W) + np.abs(np.einsum("ij,ij->i", gW, x))
    assert np.all(virial < (2 - a) * m / (4 * a) / r**a)


def test_constants_require_normalized_configuration():
    cfg = pot.CentreConfiguration.from_centres(1.5, [([2, 0, 0], 1.0), ([0, 0, 0], 1.0)])
    with pytest.raises(InvalidConfiguration):
        pot.certify_constants(cfg)
