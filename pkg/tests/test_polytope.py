import numpy as np
import pytest

from polyball.errors import (
    EmptyInterior,
    NotOnBoundary,
    ShellViolation,
    Unbounded,
)
from polyball.polytope import (
    FULL_COVER,
    ShellPolytopeParams,
    build_shell_light,
    build_shell_polytope,
    choose_rho1,
    facet_margin_eta,
    intersect_halfspaces,
    kappa_margin,
    skeleton_distance,
    skeleton_distance_batch,
    window_membership,
)


def _box(dim, a=1.0):
    hs = []
    for i in range(dim):
        for s in (1.0, -1.0):
            n = np.zeros(dim)
            n[i] = s
            hs.append((n, a))
    return intersect_halfspaces(hs)


def test_cube_oracle():
    P = _box(3)
    assert P.n_facets == 6
    assert P.vertices.shape == (8, 3)
    assert np.allclose(np.sort(np.abs(P.vertices).ravel()), 1.0)
    assert P.max_vertex_norm() == pytest.approx(np.sqrt(3.0))
    assert P.min_vertex_norm() == pytest.approx(np.sqrt(3.0))
    assert P.contains(np.array([[0.5, 0.0, -0.9]]))[0]
    assert not P.contains(np.array([[1.0 + 1e-6, 0.0, 0.0]]))[0]


def test_redundant_halfspace_pruned():
    hs = [(np.array([1.0, 0.0]), 1.0), (np.array([-1.0, 0.0]), 1.0),
          (np.array([0.0, 1.0]), 1.0), (np.array([0.0, -1.0]), 1.0),
          (np.array([1.0, 1.0]), 5.0)]
    P = intersect_halfspaces(hs)
    assert P.n_facets == 4
    assert P.vertices.shape == (4, 2)


def test_unbounded_and_empty():
    with pytest.raises(Unbounded):
        intersect_halfspaces([(np.array([1.0, 0.0]), 1.0),
                              (np.array([0.0, 1.0]), 1.0)])
    with pytest.raises(EmptyInterior):
        intersect_halfspaces([(np.array([1.0, 0.0]), -0.5),
                              (np.array([-1.0, 0.0]), 1.0),
                              (np.array([0.0, 1.0]), 1.0),
                              (np.array([0.0, -1.0]), 1.0)])


def test_skeleton_distance_square():
    P = _box(2)
    # skeleton of a 2-D polytope is its vertex set
    assert skeleton_distance(np.array([1.0, 0.0]), P) == pytest.approx(1.0)
    assert skeleton_distance(np.array([1.0, 0.3]), P) == pytest.approx(0.7)
    with pytest.raises(NotOnBoundary):
        skeleton_distance(np.array([0.5, 0.0]), P)


def test_skeleton_distance_cube():
    P = _box(3)
    # skeleton = edges; facet center is one half-side from four of them
    assert skeleton_distance(np.array([1.0, 0.0, 0.0]), P) == pytest.approx(1.0)
    d = skeleton_distance_batch(
        np.array([[1.0, 0.5, 0.0], [1.0, 1.0, 0.25]]), P)
    assert np.allclose(d, [0.5, 0.0], atol=1e-12)


def test_facet_margin_square_closed_form():
    a = 0.8
    P = _box(2, a)
    for theta in (0.1, 0.3, 0.5):
        assert facet_margin_eta(P, theta) == pytest.approx(theta / a, abs=1e-9)
    assert facet_margin_eta(P, 1.2 * a) == FULL_COVER


def test_facet_margin_cube():
    P = _box(3)
    eta = facet_margin_eta(P, 0.25)
    # deep corner (1, 0.75, 0.75): neighbour functional reaches 0.75
    assert eta == pytest.approx(0.25, abs=1e-9)


def test_window_membership(window3):
    nu = window3.shell_half_width
    mu0 = window3.inner_radii[0]
    pts = np.array([
        [0.0, 0.0, 1.0],
        [mu0 - 1e-6, 0.0, 1.0],
        [mu0 + 1e-6, 0.0, 1.0],
        [0.0, 0.0, 1.0 + nu + 1e-6],
    ])
    got = window_membership(window3, pts, 0)
    assert list(got) == [True, True, False, False]
    # the full window accepts the third point
    assert window_membership(window3, pts, None)[2]
    # shrink tightens the vertical band
    assert not window_membership(window3, pts[:1], 0, shrink=nu + 1e-9)[0]


def test_kappa_margin_positive_and_deterministic(window3):
    k = kappa_margin(window3, n_samples=4000)
    assert k > 0
    assert k == kappa_margin(window3, n_samples=4000)


@pytest.fixture(scope="module")
def shell_pair(lat2):
    # a wide ladder keeps the nets coarse enough for the fully
    # enumerated build to stay cheap
    from polyball.lift import CapWindow

    window = CapWindow(3, 0.31, 1.0 - 0.99 * np.sqrt(0.87 ** 2 - 0.31 ** 2),
                       (0.08, 0.12, 0.24, 0.28), 0.87)
    lam = (1.0 + window.gradient_bound ** 2) * \
        lat2.longest_edge ** 2 / window.base_radius
    kappa = kappa_margin(window, n_samples=4000)
    r, sigma = 0.9, 0.02
    reach = 1.4 * sigma * lat2.longest_edge
    rho1 = choose_rho1(window, r, sigma, lam, cell_reach=reach,
                       n_samples=4000, seed=5)
    delta = 0.95 * np.sqrt(2.0 * (1.0 - rho1 / r))
    params = ShellPolytopeParams(r=r, sigma=sigma, offset=np.zeros(2),
                                 rho1=rho1, delta=delta, kappa=kappa,
                                 depth_constant=lam)
    light = build_shell_light(window, params, lat2)
    full = build_shell_polytope(window, params, lat2,
                                verify_skeleton_samples=50)
    return light, full, params, lam


def test_shell_light_certificates(shell_pair):
    light, _, params, lam = shell_pair
    rho = params.r - lam * params.sigma ** 2
    assert light.is_light
    assert light.offsets.min() > rho
    assert light.max_vertex_norm() == params.r
    assert light.meta["net_support_bound"] <= params.r
    assert light.meta["window_skeleton"].shape[0] > 0


def test_shell_light_matches_full(shell_pair):
    """The halfspace-only shell and the fully enumerated one share the
    lifted facets exactly and agree on membership up to the sphere-net
    discretization r delta^2 / 2 (their nets are drawn independently)."""
    light, full, params, _ = shell_pair
    assert light.meta["n_lift_facets"] == full.meta["n_lift_facets"]
    rng = np.random.default_rng(9)
    d = rng.standard_normal((5000, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    pts = d * rng.uniform(params.rho1 - 0.01, params.r, 5000)[:, None]
    sl = light.support_values(pts)
    sf = full.support_values(pts)
    slack = 0.5 * params.r * params.delta ** 2
    disagree = (sl <= 0) != (sf <= 0)
    assert np.abs(sl[disagree]).max(initial=0.0) < slack
    assert np.abs(sf[disagree]).max(initial=0.0) < slack
    vn = np.linalg.norm(full.vertices, axis=1)
    assert vn.max() <= params.r + 1e-12
    assert vn.min() > params.r - params.depth_constant * params.sigma ** 2


def test_shell_sandwich(shell_pair):
    light, _, params, lam = shell_pair
    rho = params.r - lam * params.sigma ** 2
    rng = np.random.default_rng(4)
    d = rng.standard_normal((2000, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    assert light.contains(rho * d).all()
    assert not light.contains(params.r * d * (1 + 1e-9)).any()


def test_choose_rho1_form(shell_pair, window3):
    _, _, params, lam = shell_pair
    k = round(-np.log2(1.0 - params.rho1 / params.r))
    assert np.isclose(params.rho1, params.r * (1 - 2.0 ** (-k)))
    assert params.rho1 > params.r - params.sigma ** 2 * lam
