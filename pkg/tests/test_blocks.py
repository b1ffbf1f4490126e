import numpy as np
import pytest
from scipy.special import polygamma

from polyball.blocks import (
    build_exhaustion,
    build_small_block,
    chain_divergence_lowerbound,
    estimate_shell_facets,
    find_skeleton_offsets,
    rotation_cover,
    sample_window_chains,
    separation_mu,
    sigma_cap,
    window_cap_angle,
)
from polyball.errors import ScheduleInfeasible

from conftest import standard_window


def test_offset_family_shape(lat2, fam2):
    assert fam2.offsets.shape == (3, 2)
    assert np.allclose(fam2.offsets[0], 0.0)
    t = fam2.sweep_parameters
    assert np.all(np.diff(t) < 0) and t[0] < fam2.meta["epsilon"]
    # offsets are collinear along the sweep direction
    q = fam2.sweep_direction
    proj = fam2.offsets[1:] @ q
    assert np.allclose(fam2.offsets[1:], proj[:, None] * q, atol=1e-12)
    assert fam2.meta["emptiness_clearance"] > 0


def test_offset_family_deterministic(lat2, fam2):
    again = find_skeleton_offsets(lat2, 0.25, seed=7)
    assert np.array_equal(again.offsets, fam2.offsets)
    assert again.separation_mu == fam2.separation_mu


def test_offset_family_scaling(fam2):
    half = fam2.scaled(0.5)
    assert np.allclose(half.offsets, 0.5 * fam2.offsets)
    assert np.isclose(half.separation_mu, 0.5 * fam2.separation_mu)


def test_separation_mu_positive_and_stable(lat2, fam2):
    assert fam2.separation_mu > 0
    finer = separation_mu(lat2, fam2, h=lat2.longest_edge / 160.0)
    # a finer grid can only tighten the certificate upward
    assert finer >= fam2.separation_mu - 1e-12


def test_rotation_cover_small_window(lat2):
    w = standard_window(lat2)
    rots = rotation_cover(w, n_samples=20000, max_rotations=4)
    assert len(rots) == 4
    assert np.allclose(rots[0], np.eye(3), atol=1e-12)
    for A in rots:
        assert np.allclose(A @ A.T, np.eye(3), atol=1e-10)
        assert np.isclose(np.linalg.det(A), 1.0, atol=1e-10)
    # rotated poles are spread at least a cap radius apart
    poles = np.array([A @ w.pole_direction for A in rots])
    d = np.linalg.norm(poles[:, None] - poles[None], axis=2)
    chord = 2.0 * np.sin(0.5 * window_cap_angle(w) * 0.9)
    assert d[~np.eye(4, dtype=bool)].min() > chord * 0.5


def test_full_rotation_cover_certifies(lat2):
    """Without truncation the rotated windows must cover the sphere."""
    from scipy.spatial import cKDTree

    w = standard_window(lat2)
    rots = rotation_cover(w, n_samples=20000, seed=13)
    poles = np.array([A @ w.pole_direction for A in rots])
    rng = np.random.default_rng(99)
    fresh = rng.standard_normal((20000, 3))
    fresh /= np.linalg.norm(fresh, axis=1, keepdims=True)
    gap, _ = cKDTree(poles).query(fresh, k=1)
    ang = 2.0 * np.arcsin(0.5 * gap.max())
    assert ang <= window_cap_angle(w) + 1e-9


def test_small_block_nesting(lat2, fam2, window3):
    kap = 0.0092
    lam = (1.0 + window3.gradient_bound ** 2) * \
        lat2.longest_edge ** 2 / window3.base_radius
    sigma = 0.9 * sigma_cap(window3, lat2, lam, kap)
    blk = build_small_block(0.93, sigma, lat2, fam2, window3,
                            depth_constant=lam, kappa=kap,
                            rho1_samples=2000)
    assert blk.size == 3
    lo, hi = blk.shell
    assert lo == pytest.approx(0.93 - 3 * sigma ** 2 * lam)
    for j in range(1, 3):
        inner, outer = blk.polytopes[j - 1], blk.polytopes[j]
        assert outer.offsets.min() > inner.max_vertex_norm()
    for P in blk.polytopes:
        assert lo < P.offsets.min() and P.max_vertex_norm() <= hi + 1e-12


def test_sample_window_chains_lower_bound(lat2, fam2, window3):
    kap = 0.0092
    lam = (1.0 + window3.gradient_bound ** 2) * \
        lat2.longest_edge ** 2 / window3.base_radius
    sigma = 0.9 * sigma_cap(window3, lat2, lam, kap)
    blk = build_small_block(0.93, sigma, lat2, fam2, window3,
                            depth_constant=lam, kappa=kap,
                            rho1_samples=2000)
    rng = np.random.default_rng(0)
    lengths = sample_window_chains(blk, 2000, rng)
    assert lengths.min() >= sigma * fam2.separation_mu * (1 - 1e-9)


def test_exhaustion_schedule(exh_small, fam2):
    c = exh_small.constants
    sig = exh_small.sigmas
    # sigma_j = c / (j + a), normalized by the trigamma tail sum
    j = np.arange(1, 4)
    assert np.allclose(sig, c["c"] / (j + c["a"]), atol=1e-15)
    target = (1.0 - c["r1"]) / (c["M"] * c["L"] * c["lambda"])
    assert abs(c["c"] ** 2 * polygamma(1, c["a"] + 1.0) - target) < 1e-12
    # radial recurrence and monotone approach to 1
    r = exh_small.radii
    assert np.allclose(np.diff(r), c["M"] * c["L"] * sig ** 2 * c["lambda"])
    assert np.all(np.diff(r) > 0) and r[-1] < 1.0
    assert sig[0] < c["sigma0"]
    assert c["mu"] == fam2.separation_mu


def test_exhaustion_nesting_and_thetas(exh_small):
    polys = exh_small.polytopes
    assert len(polys) == 7
    for n in range(1, len(polys)):
        assert polys[n].offsets.min() > polys[n - 1].max_vertex_norm()
    th = exh_small.thetas()
    assert np.all(np.diff(th) < 0)
    assert np.isclose(th[0], exh_small.theta1 / 2.0)
    assert exh_small.block_of(1) == 1
    assert exh_small.block_of(6) == 1
    assert exh_small.block_of(7) == 2


def test_chain_bound_additive(exh_small):
    b12 = chain_divergence_lowerbound(exh_small, 1, 2)
    b33 = chain_divergence_lowerbound(exh_small, 3, 3)
    b13 = chain_divergence_lowerbound(exh_small, 1, 3)
    assert b13 == pytest.approx(b12 + b33)
    assert b12 > 0
    mu = exh_small.constants["mu"]
    assert b13 == pytest.approx(mu * exh_small.sigmas.sum())
    with pytest.raises(ValueError):
        chain_divergence_lowerbound(exh_small, 1, 4)


def test_estimate_monotone(lat2, window3):
    lam = 3.0
    a = estimate_shell_facets(0.004, 3, lam, window3)
    b = estimate_shell_facets(0.002, 3, lam, window3)
    assert b > a > 0


def test_schedule_refuses_facet_blowup(lat2, fam2, window3):
    with pytest.raises(ScheduleInfeasible) as ei:
        build_exhaustion(lat2, fam2, window3, n_blocks=2,
                         max_rotations=2, max_polytopes=1, seed=3,
                         facet_budget=10.0)
    assert "budget" in str(ei.value)


def test_exhaustion_deterministic(lat2, fam2, window3, exh_small):
    again = build_exhaustion(lat2, fam2, window3, n_blocks=3,
                             max_rotations=2, max_polytopes=7, seed=3)
    assert np.array_equal(again.sigmas, exh_small.sigmas)
    for P, Q in zip(again.polytopes, exh_small.polytopes):
        assert np.array_equal(P.normals, Q.normals)
        assert np.array_equal(P.offsets, Q.offsets)
