import numpy as np
import pytest

from polyball.errors import DomainError
from polyball.lattice import Tessellation
from polyball.lift import (
    CapWindow,
    build_lifted_surface,
    depth_bound,
    grad_psi,
    lipschitz_bound_omega,
    projected_circumsphere,
    psi,
    psi_batch,
)

from conftest import standard_window


def test_psi_oracle():
    assert psi(1.0, [0.0, 0.0]) == 1.0
    assert np.isclose(psi(0.9, [0.3, 0.4]), np.sqrt(0.81 - 0.25))
    with pytest.raises(DomainError):
        psi(0.5, [0.5, 0.0])
    xs = np.array([[0.1, 0.2], [0.0, 0.0]])
    assert np.allclose(psi_batch(0.95, xs),
                       [psi(0.95, x) for x in xs])


def test_grad_psi_finite_difference():
    x = np.array([0.2, -0.1])
    g = grad_psi(0.9, x)
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (psi(0.9, x + e) - psi(0.9, x - e)) / (2 * h)
        assert abs(g[i] - fd) < 1e-8


def test_depth_bound_values():
    assert depth_bound(1.0, 0.0) == 1.0
    assert np.isclose(depth_bound(0.9, 0.3), 0.9 - 0.09 / 0.9)
    with pytest.raises(DomainError):
        depth_bound(0.5, 0.6)


def test_projected_circumsphere_flat_heights():
    """Zero heights: the lifted circumsphere sits over the flat one."""
    from polyball._geom import circumsphere

    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.3, 0.8]])
    out = projected_circumsphere(tri, np.zeros(3))
    c, R = circumsphere(tri)
    assert np.allclose(out["projected_center"], c, atol=1e-12)
    assert np.isclose(out["radius"], R, atol=1e-12)
    assert np.allclose(out["normal"], [0.0, 0.0, 1.0], atol=1e-12)


def test_projected_circumsphere_passes_through_lifts():
    rng = np.random.default_rng(2)
    tri = rng.normal(size=(3, 2))
    h = rng.normal(scale=0.1, size=3)
    out = projected_circumsphere(tri, h)
    lifted = np.hstack([tri, (h - h[-1])[:, None]])
    d = np.linalg.norm(lifted - out["center"], axis=1)
    assert np.allclose(d, out["radius"], atol=1e-10)
    # lifted points lie on the hyperplane <y|w0> = <v_M|w0>
    dots = lifted @ out["normal"]
    assert np.ptp(dots) < 1e-10


def test_window_validation():
    with pytest.raises(DomainError):
        CapWindow(3, 0.3, 0.1, (0.1, 0.2, 0.15, 0.25), 0.9)
    with pytest.raises(DomainError):
        CapWindow(3, 0.3, 0.1, (0.1, 0.2, 0.25), 0.9)
    with pytest.raises(DomainError):
        # window bottom outside the base ball
        CapWindow(3, 0.6, 0.05, (0.1, 0.2, 0.3, 0.4), 0.61)


def test_window_gradient_bound(window3):
    mu, R0 = window3.window_radius, window3.base_radius
    # compare against a numeric sup of |grad psi_r| over the window
    best = 0.0
    for r in np.linspace(R0 + 1e-6, 1.0 - 1e-6, 50):
        x = np.array([mu - 1e-12, 0.0])
        best = max(best, float(np.linalg.norm(grad_psi(r, x))))
    assert window3.gradient_bound >= best - 1e-9
    assert window3.gradient_bound <= mu / np.sqrt(R0 ** 2 - mu ** 2) + 1e-12


def test_window_from_gradient_bound():
    w = CapWindow.from_gradient_bound(3, 0.19, 0.87)
    assert w.gradient_bound <= 0.19
    assert w.inner_radii[0] < w.inner_radii[-1] < w.window_radius


def test_rotated_window(window3):
    R = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    w = window3.rotated(R)
    assert np.allclose(w.pole_direction, [0.0, 0.0, 1.0])
    assert w.window_radius == window3.window_radius


def test_lipschitz_bound(lat2):
    omega = lipschitz_bound_omega(lat2, n_random=200, n_dirs=40, seed=7)
    assert 0 < omega < 1
    # determinism
    assert omega == lipschitz_bound_omega(lat2, n_random=200, n_dirs=40, seed=7)


def test_surface_convex_and_on_sphere(lat2, window3):
    tess = Tessellation(lat2, 0.01, np.zeros(2))
    surf = build_lifted_surface(window3, tess, 0.9)
    assert surf.convexity_margin > 0
    # every lifted vertex sits exactly on the r-sphere
    vnorms = np.linalg.norm(surf.facets.reshape(-1, 3), axis=1)
    assert np.allclose(vnorms, 0.9, atol=1e-12)
    # facets stay below the sphere but above the depth bound
    lam = (1.0 + window3.gradient_bound ** 2) * lat2.longest_edge ** 2 / 0.9
    assert surf.facet_min_norms().min() >= 0.9 - 0.01 ** 2 * lam


def test_surface_lift_interpolates(lat2, window3):
    tess = Tessellation(lat2, 0.01, np.zeros(2))
    surf = build_lifted_surface(window3, tess, 0.9)
    centroid = surf.cells[0].mean(axis=0)
    y = surf.lift(centroid)
    assert np.allclose(y[:2], centroid, atol=1e-12)
    # affine interpolation lies on or below the sphere
    assert np.linalg.norm(y) <= 0.9 + 1e-12
    with pytest.raises(DomainError):
        surf.lift(np.array([5.0, 5.0]))


def test_surface_requires_admissible_radius(lat2, window3):
    tess = Tessellation(lat2, 0.01, np.zeros(2))
    with pytest.raises(DomainError):
        build_lifted_surface(window3, tess, window3.base_radius - 0.01)
