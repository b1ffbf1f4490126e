import numpy as np
import pytest

from polyball.blocks import Exhaustion
from polyball.errors import (
    DegreeCapExceeded,
    MarginFailure,
    OddDimension,
    OutsideBall,
)
from polyball.holo import (
    build_f_sequence,
    evaluate_f,
    facet_functionals,
    lemma_12_2,
    runge_two_region,
    to_complex,
    trace_along_path,
)
from polyball.paths import PolylinePath, _regular_polygon


def test_to_complex():
    Z = to_complex(np.array([[1.0, 2.0, 3.0, 4.0]]))
    assert Z.shape == (1, 2)
    assert Z[0, 0] == 1.0 + 2.0j and Z[0, 1] == 3.0 + 4.0j
    with pytest.raises(OddDimension):
        to_complex(np.array([[1.0, 2.0, 3.0]]))


def test_facet_functionals_square():
    """Square |x|_inf <= a: functionals (+-1/a, +-i/a), modulus bound
    sqrt(2) exactly (attained at the vertices)."""
    a = 0.7
    hs = [(np.array([s, 0.0]), a) for s in (1.0, -1.0)] + \
         [(np.array([0.0, s]), a) for s in (1.0, -1.0)]
    from polyball.polytope import intersect_halfspaces

    P = intersect_halfspaces(hs)
    funcs, R = facet_functionals(P)
    W = np.array([f.w for f in funcs])
    assert np.allclose(np.sort(np.abs(W.ravel())), 1.0 / a)
    assert R == pytest.approx(np.sqrt(2.0), abs=1e-12)


def test_runge_zero_target():
    p = runge_two_region(1.5, 0.5, 0.0, 0.1)
    assert p.degree == 0
    z = np.array([1.2, -1.0 + 0.3j])
    assert np.all(p(z) == 0.0)


def test_runge_two_region_verified():
    p = runge_two_region(1.2, 0.9, 2.0, 0.1, seed=17)
    assert p.meta["sup_error_right"] <= 0.05
    assert p.meta["sup_error_left"] <= 0.05
    # independent fresh-sample check away from the fitting seed
    rng = np.random.default_rng(123)
    phi = rng.uniform(-np.pi, np.pi, 3000)
    z = 1.2 * np.exp(1j * phi)
    right = z[z.real >= 1.0]
    left = z[z.real <= 0.1]
    assert np.abs(p(right) - 2.0).max() <= 0.1
    assert np.abs(p(left)).max() <= 0.1


def test_runge_seed_independent_degree():
    a = runge_two_region(1.2, 0.9, 2.0, 0.1, seed=17)
    b = runge_two_region(1.2, 0.9, 2.0, 0.1, seed=24)
    # deterministic Chebyshev fit nodes: identical polynomial, only the
    # verification draws differ
    assert a.degree == b.degree
    assert np.array_equal(a.coefficients, b.coefficients)


def test_runge_degree_cap():
    with pytest.raises(DegreeCapExceeded) as ei:
        runge_two_region(1.5, 0.3, 2.0, 0.05, degree_cap=64)
    assert ei.value.degree == 64
    assert len(ei.value.errors) == 2


def test_runge_preconditions():
    with pytest.raises(ValueError):
        runge_two_region(0.9, 0.5, 1.0, 0.1)
    with pytest.raises(ValueError):
        runge_two_region(1.5, 2.6, 1.0, 0.1)   # low region empty
    with pytest.raises(ValueError):
        runge_two_region(1.5, -0.1, 1.0, 0.1)


def _squares_exhaustion():
    """Two nested squares sized so step 1 is a certified zero term
    (theta_1 covers the tiny inner boundary) and step 2 has margin
    eta = theta_2 / apothem = 0.97."""
    sq1 = _regular_polygon(4, 0.015, 0.0)
    sq2 = _regular_polygon(4, 0.8, np.pi / 4)
    a2 = 0.8 * np.cos(np.pi / 4)
    return Exhaustion(
        blocks=(), polytopes=(sq1, sq2),
        radii=np.array([0.015, 0.8]), sigmas=np.array([0.1, 0.1]),
        theta1=3.88 * a2, constants={"M": 2, "L": 1, "mu": 1.0},
        n_blocks=2,
    )


@pytest.fixture(scope="module")
def squares_series():
    return build_f_sequence(_squares_exhaustion(), 2, n_samples=2000)


def test_lemma_full_cover_term():
    sq = _regular_polygon(4, 0.015, 0.0)
    term = lemma_12_2(sq, np.zeros((1, 2)), theta=1.0, epsilon=0.5,
                      target_level=2.0)
    assert term.meta["full_cover"]
    assert term.W.shape[0] == 0
    Z = to_complex(np.random.default_rng(0).uniform(-0.01, 0.01, (10, 2)))
    assert np.all(term.evaluate(Z) == 0.0)


def test_lemma_margin_failure():
    sq = _regular_polygon(4, 0.8, np.pi / 4)
    # inner set touching the boundary leaves no margin
    with pytest.raises(MarginFailure):
        lemma_12_2(sq, sq.vertices, theta=0.01, epsilon=0.25,
                   target_level=2.0)


def test_series_certificates(squares_series):
    ser = squares_series
    assert ser.n_terms == 2
    c1, c2 = ser.certificates
    assert c1["min_re"] is None and c1["n_outside"] == 0  # full cover
    assert c2["min_re"] >= 3.0
    assert c2["step_perturbation"] <= 0.25
    assert ser.terms[0].phi.degree == 0
    assert ser.terms[1].phi.degree >= 1


def test_series_small_at_origin(squares_series):
    f0 = evaluate_f(np.zeros((1, 2)), squares_series)
    assert np.abs(f0[0]) < 0.5
    with pytest.raises(OutsideBall):
        evaluate_f(np.array([[1.1, 0.0]]), squares_series)


def test_series_boundary_growth(squares_series):
    """Re f_2 >= 3 on the outer boundary off the corner neighbourhoods,
    on fresh samples independent of the build's own draws."""
    exh = _squares_exhaustion()
    P = exh.polytopes[1]
    theta = exh.theta(2)
    rng = np.random.default_rng(7)
    t = rng.uniform(0.0, 1.0, 3000)
    e = rng.integers(0, 4, 3000)
    V = P.vertices
    pts = V[e] * (1 - t)[:, None] + V[(e + 1) % 4] * t[:, None]
    from polyball.polytope import skeleton_distance_batch

    keep = skeleton_distance_batch(pts, P) > theta
    re_f = evaluate_f(pts[keep], squares_series).real
    assert re_f.min() >= 3.0 - 1e-6


def test_trace_along_path(squares_series):
    path = PolylinePath(vertices=np.array([[0.0, 0.01], [0.95, 0.01]]))
    prof = trace_along_path(path, squares_series, samples_per_segment=60)
    assert prof["t"].shape == prof["re_f"].shape == prof["region"].shape
    assert prof["region"][0] == 0 and prof["region"][-1] == 2
    assert np.all(np.diff(prof["region"]) >= 0)
    # crossing the outer boundary forces a large real part nearby
    assert prof["max_re"] >= 3.0 - 0.5


def test_trace_constant_path(squares_series):
    path = PolylinePath(vertices=np.array([[0.1, 0.1], [0.1, 0.1]]))
    prof = trace_along_path(path, squares_series, samples_per_segment=5)
    assert np.ptp(prof["re_f"]) == 0.0
