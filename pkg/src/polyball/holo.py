"""Complex-analytic layer over even-dimensional polytopes.

Two-region polynomial approximants, facet functionals under the
R^{2N} = C^N identification, the facet-sum boundary polynomial, and the
inductive series whose real part grows across consecutive boundaries.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CertificateFailure,
    DegreeCapExceeded,
    MarginFailure,
    OddDimension,
    OutsideBall,
)
from .polytope import FULL_COVER, facet_margin_eta, skeleton_distance_batch

#: degree cap for the two-region approximant
DEGREE_CAP = 2048


@dataclass(frozen=True)
class RungeApproximant:
    """Polynomial close to targetLevel on {|z| <= R, Re z >= 1} and to 0
    on {|z| <= R, Re z <= 1 - margin}, with verified sup errors.

    Stored in the fitted Arnoldi basis: hessenberg holds the recurrence
    q_{k+1}(z) = (z q_k(z) - sum_j H[j,k] q_j(z)) / H[k+1,k], which keeps
    evaluation well conditioned at degrees where the raw power basis
    fails.  coefficients are against the q_k.
    """

    coefficients: np.ndarray       # complex, (degree+1,)
    hessenberg: np.ndarray         # complex, (degree+1, degree)
    domain_radius: float
    margin: float
    target_level: float
    tolerance: float
    degree: int
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __call__(self, zeta):
        z = np.asarray(zeta, dtype=complex)
        shape = z.shape
        z = z.ravel()
        out = np.full(z.shape, self.coefficients[0], dtype=complex)
        if self.degree == 0:
            return out.reshape(shape)
        Q = np.zeros((z.shape[0], self.degree + 1), dtype=complex)
        Q[:, 0] = 1.0
        H = self.hessenberg
        for k in range(self.degree):
            q = z * Q[:, k] - Q[:, : k + 1] @ H[: k + 1, k]
            Q[:, k + 1] = q / H[k + 1, k]
        return (Q @ self.coefficients).reshape(shape)


def _region_boundary(R, re_cut, side, n, rng=None):
    """Boundary samples of {|z| <= R, side * Re z >= side * re_cut}.

    The error of a polynomial against a constant target is analytic, so
    its sup over the region is attained here (arc plus chord).  Without
    an rng the parameters are Chebyshev-spaced, clustering samples at the
    arc/chord corners where the fit error oscillates hardest; random
    parameters are for fresh verification draws only.
    """
    phi_max = np.arccos(np.clip(re_cut / R, -1.0, 1.0))
    if rng is None:
        u = np.cos(np.pi * (np.arange(n) + 0.5) / n)
        v = u
    else:
        u = 2.0 * rng.random(n) - 1.0
        v = 2.0 * rng.random(n) - 1.0
    if side > 0:
        phi = phi_max * u
    else:
        phi = np.pi + (np.pi - phi_max) * u
    arc = R * np.exp(1j * phi)
    h = np.sqrt(max(R * R - re_cut * re_cut, 0.0))
    chord = re_cut + 1j * h * v
    return np.concatenate([arc, chord])


def runge_two_region(R, eta, target_level, tolerance, seed=17,
                     degree_cap=DEGREE_CAP):
    """Two-region approximant by least squares with degree escalation.

    Fits the two-valued target on boundary samples of both compacts,
    doubling the degree until fresh samples verify both sup norms with a
    2x safety margin.  Escalation also aborts early when the error decay
    projects the required degree past the cap.
    """
    if eta <= 0 or tolerance <= 0:
        raise ValueError("eta and tolerance must be positive")
    if R < 1.0:
        raise ValueError("the level-1 region needs R >= 1")
    if 1.0 - eta <= -R:
        raise ValueError("margin eta leaves the low region empty")

    def verify(approx, rng):
        right = _region_boundary(R, 1.0, +1, 5000, rng)
        left = _region_boundary(R, 1.0 - eta, -1, 5000, rng)
        e_r = float(np.abs(approx(right) - target_level).max())
        e_l = float(np.abs(approx(left)).max())
        return e_r, e_l

    if target_level == 0.0:
        approx = RungeApproximant(
            coefficients=np.zeros(1, dtype=complex),
            hessenberg=np.zeros((1, 0), dtype=complex), domain_radius=R,
            margin=eta, target_level=0.0, tolerance=tolerance, degree=0,
        )
        e_r, e_l = verify(approx, np.random.default_rng(seed + 1))
        return RungeApproximant(
            coefficients=approx.coefficients, hessenberg=approx.hessenberg,
            domain_radius=R, margin=eta,
            target_level=0.0, tolerance=tolerance, degree=0,
            meta={"sup_error_right": e_r, "sup_error_left": e_l},
        )

    degree = 16
    prev_err = None
    while True:
        n_fit = max(4 * degree, 2000)
        right = _region_boundary(R, 1.0, +1, n_fit // 2)
        left = _region_boundary(R, 1.0 - eta, -1, n_fit // 2)
        pts = np.concatenate([right, left])
        target = np.concatenate(
            [np.full(right.shape[0], target_level), np.zeros(left.shape[0])]
        ).astype(complex)
        Q, H = _arnoldi_basis(pts, degree)
        coef, *_ = np.linalg.lstsq(Q, target, rcond=None)
        approx = RungeApproximant(
            coefficients=coef, hessenberg=H, domain_radius=R,
            margin=eta, target_level=target_level, tolerance=tolerance,
            degree=degree,
        )
        e_r, e_l = verify(approx, np.random.default_rng(seed + 1))
        err = max(e_r, e_l)
        if err <= 0.5 * tolerance:
            return RungeApproximant(
                coefficients=coef, hessenberg=H, domain_radius=R,
                margin=eta, target_level=target_level, tolerance=tolerance,
                degree=degree,
                meta={"sup_error_right": e_r, "sup_error_left": e_l},
            )
        if degree >= degree_cap:
            raise DegreeCapExceeded(
                "two-region fit at degree %d has error %.3e > %.3e"
                % (degree, err, 0.5 * tolerance),
                degree=degree, errors=(e_r, e_l),
            )
        # the error curve often plateaus before its asymptotic collapse;
        # only trust the decay projection once the plateau is behind us
        if prev_err is not None and err > 1e-14 and degree >= 512:
            gain = prev_err / err
            # error decays like exp(-degree * g); a small observed gain
            # projects the required degree far past the cap
            need = degree * np.log(err / (0.5 * tolerance)) / \
                max(np.log(max(gain, 1.0 + 1e-9)), 1e-9)
            if need > 4.0 * degree_cap:
                raise DegreeCapExceeded(
                    "error decay %.3g per doubling at degree %d projects "
                    "degree %.2g past the cap %d (error %.3e, tol %.3e)"
                    % (gain, degree, need, degree_cap, err,
                       0.5 * tolerance),
                    degree=degree, errors=(e_r, e_l),
                )
        prev_err = err
        degree = min(2 * degree, degree_cap)


def _arnoldi_basis(pts, degree):
    """Orthonormal polynomial basis on the sample set (Arnoldi iteration
    on multiplication by z), with the Hessenberg recurrence for later
    evaluation at fresh points."""
    m = pts.shape[0]
    Q = np.zeros((m, degree + 1), dtype=complex)
    H = np.zeros((degree + 1, degree), dtype=complex)
    Q[:, 0] = 1.0
    for k in range(degree):
        q = pts * Q[:, k]
        h = Q[:, : k + 1].conj().T @ q / m
        q = q - Q[:, : k + 1] @ h
        H[: k + 1, k] = h
        H[k + 1, k] = np.linalg.norm(q) / np.sqrt(m)
        Q[:, k + 1] = q / H[k + 1, k]
    return Q, H


@dataclass(frozen=True)
class FacetFunctional:
    """Complex vector with Re<z|w> equal to the real facet functional."""

    w: np.ndarray                  # (N,) complex


def _complexify(X):
    """(n, 2N) real rows -> (n, N) complex, pairing consecutive axes."""
    return X[:, 0::2] + 1j * X[:, 1::2]


def facet_functionals(P):
    """Facet functionals of P in C^N plus the modulus bound R of (z in P).

    |<z|w_i>| is convex in z, so the bound is exact on vertices; light
    polytopes use |z| <= radius bound instead.
    """
    M = P.dimension
    if M % 2 != 0:
        raise OddDimension("complex identification needs even dimension")
    X = P.normals / P.offsets[:, None]      # offset-1 functionals
    W = _complexify(X)
    if P.is_light or P.vertices.shape[0] == 0:
        R = float(P.max_vertex_norm() * np.abs(W).sum(axis=1).max())
        R = max(R, float(P.max_vertex_norm() / P.offsets.min()))
    else:
        Z = _complexify(P.vertices)
        R = float(np.abs(Z @ W.conj().T).max())
    return [FacetFunctional(w=w) for w in W], max(R, 1.0)


@dataclass(frozen=True)
class HoloTerm:
    """One induction step: g(z) = sum_j Phi(<z|w_j>)."""

    W: np.ndarray                  # (n_facets, N) complex
    phi: RungeApproximant
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def evaluate(self, Z):
        """Z (B, N) complex -> (B,) complex."""
        zeta = Z @ self.W.conj().T
        return self.phi(zeta).sum(axis=1)


@dataclass(frozen=True)
class HoloSeries:
    """Partial sums f_n = sum of the first n terms, with certificates."""

    terms: tuple                   # HoloTerm per induction step
    polytopes: tuple               # P_n the n-th term was built against
    certificates: tuple            # dict per step with sampled margins
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def n_terms(self):
        return len(self.terms)


def to_complex(points):
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.shape[1] % 2 != 0:
        raise OddDimension("points must live in an even real dimension")
    return _complexify(P)


def sample_boundary(P, n_samples, rng):
    """Random points on bP: convex combinations within random facets."""
    fidx = rng.integers(0, P.n_facets, n_samples)
    out = np.empty((n_samples, P.dimension))
    for i, f in enumerate(fidx):
        V = P.vertices[list(P.facet_vertex_indices[f])]
        w = rng.dirichlet(np.ones(V.shape[0]))
        out[i] = w @ V
    return out


def sample_interior(P, n_samples, rng):
    """Random points of P: Dirichlet mixtures of small vertex subsets."""
    V = P.vertices
    k = min(V.shape[0], P.dimension + 1)
    idx = rng.integers(0, V.shape[0], (n_samples, k))
    w = rng.dirichlet(np.ones(k), n_samples)
    return np.einsum("nk,nkd->nd", w, V[idx])


def _eval_terms(terms, Z):
    """Sum of term values with pairwise reduction over terms."""
    if not terms:
        return np.zeros(Z.shape[0], dtype=complex)
    vals = np.stack([t.evaluate(Z) for t in terms], axis=0)
    return np.sum(vals, axis=0)


def lemma_12_2(P, K, theta, epsilon, target_level, seed=23, n_samples=4000):
    """Facet-sum polynomial with Re f >= target on bP outside the
    theta-neighbourhood of the skeleton and |f| < epsilon on K.

    K may be an inner ConvexPolytope or an (k, M) array of points.  The
    margin eta comes from the facet erosion at theta; every K point must
    satisfy all offset-1 functionals below 1 - eta.  Returns a HoloTerm
    (zero-facet term when the neighbourhood covers all of bP).
    """
    if theta <= 0 or epsilon <= 0:
        raise ValueError("theta and epsilon must be positive")
    M = P.dimension
    if M % 2 != 0:
        raise OddDimension("complex identification needs even dimension")
    rng = np.random.default_rng(seed)
    eta = facet_margin_eta(P, theta)
    if eta is FULL_COVER:
        zero = RungeApproximant(
            coefficients=np.zeros(1, dtype=complex),
            hessenberg=np.zeros((1, 0), dtype=complex), domain_radius=1.0,
            margin=1.0, target_level=0.0, tolerance=epsilon, degree=0,
        )
        return HoloTerm(W=np.zeros((0, M // 2), dtype=complex), phi=zero,
                        meta={"eta": None, "full_cover": True})
    funcs, R = facet_functionals(P)
    W = np.array([f.w for f in funcs])
    X = P.normals / P.offsets[:, None]
    if isinstance(K, np.ndarray):
        K_pts = np.atleast_2d(K)
    else:
        K_pts = K.vertices if K.vertices.shape[0] else None
        if K_pts is None:
            raise MarginFailure("inner polytope has no vertex representation")
    # the margin may be reduced so the inner set clears every functional
    depth = float((K_pts @ X.T).max())
    eta = min(eta, 1.0 - depth)
    if eta <= 1e-12:
        raise MarginFailure(
            "inner set reaches functional depth %.12g; no margin left"
            % depth
        )
    n = P.n_facets
    phi = runge_two_region(R, eta, target_level + epsilon, epsilon / n,
                           seed=seed + 1)
    term = HoloTerm(W=W, phi=phi, meta={"eta": eta, "R": R, "theta": theta})

    # sampled verification of both conclusions
    bpts = sample_boundary(P, n_samples, rng)
    skd = skeleton_distance_batch(bpts, P)
    outside = bpts[skd > theta]
    if outside.shape[0]:
        re_f = term.evaluate(to_complex(outside)).real
        if re_f.min() < target_level - 1e-9:
            raise MarginFailure(
                "Re f dips to %.12g below target %.12g off the skeleton"
                % (float(re_f.min()), target_level)
            )
    K_samp = K_pts if isinstance(K, np.ndarray) else np.vstack(
        [K_pts, sample_interior(K, n_samples, rng)]
    )
    fK = np.abs(term.evaluate(to_complex(K_samp)))
    if fK.max() >= epsilon:
        raise MarginFailure(
            "|f| reaches %.12g >= epsilon %.12g on the inner set"
            % (float(fK.max()), epsilon)
        )
    return term


def build_f_sequence(exh, n_max, seed=29, n_samples=4000):
    """Inductive series f_n over the first n_max polytopes.

    Base term targets level 2 while staying below 1/2 at the origin;
    each step lifts the sampled minimum of Re f_m on the next boundary
    to m + 2 (plus a 0.1 pad) while perturbing the previous polytope by
    at most 2^-(m+1).  Certificates (i)/(ii) are sampled and stored.
    """
    polys = exh.polytopes[:n_max]
    if len(polys) < n_max:
        raise ValueError("exhaustion has only %d polytopes" % len(polys))
    rng = np.random.default_rng(seed)
    terms, certs = [], []
    origin = np.zeros((1, polys[0].dimension))
    t1 = lemma_12_2(polys[0], origin, exh.theta(1), 0.5, 2.0,
                    seed=seed + 1, n_samples=n_samples)
    terms.append(t1)
    certs.append(_certify(terms, polys[0], exh.theta(1), 1, n_samples, rng))
    for m in range(1, n_max):
        P_next, P_prev = polys[m], polys[m - 1]
        bnd = sample_boundary(P_next, n_samples, rng)
        re_f = _eval_terms(terms, to_complex(bnd)).real
        T = (m + 2) - float(re_f.min()) + 0.1
        g = lemma_12_2(P_next, P_prev, exh.theta(m + 1), 2.0 ** -(m + 1), T,
                       seed=seed + 2 * m, n_samples=n_samples)
        # certificate (ii) on the previous polytope before accepting
        prev_pts = np.vstack([
            P_prev.vertices, sample_interior(P_prev, n_samples, rng)
        ])
        delta = float(np.abs(g.evaluate(to_complex(prev_pts))).max())
        if delta > 2.0 ** -(m + 1):
            raise CertificateFailure(
                "step %d perturbation %.3e exceeds 2^-(m+1)" % (m + 1, delta)
            )
        terms.append(g)
        cert = _certify(terms, P_next, exh.theta(m + 1), m + 1, n_samples,
                        rng)
        cert["step_perturbation"] = delta
        certs.append(cert)
    return HoloSeries(
        terms=tuple(terms), polytopes=tuple(polys),
        certificates=tuple(certs),
        meta={"seed": seed, "n_samples": n_samples},
    )


def _certify(terms, P, theta, n, n_samples, rng):
    """Certificate (i): sampled min of Re f_n on bP_n off the skeleton."""
    bnd = sample_boundary(P, n_samples, rng)
    skd = skeleton_distance_batch(bnd, P)
    outside = bnd[skd > theta]
    if outside.shape[0] == 0:
        return {"n": n, "theta": float(theta), "min_re": None,
                "n_outside": 0}
    re_f = _eval_terms(terms, to_complex(outside)).real
    min_re = float(re_f.min())
    if min_re < n + 1 - 1e-9:
        raise CertificateFailure(
            "Re f_%d reaches %.12g < %d on bP off the skeleton"
            % (n, min_re, n + 1)
        )
    return {"n": n, "theta": float(theta), "min_re": min_re,
            "n_outside": int(outside.shape[0])}


def evaluate_f(z, series, n_terms=None):
    """f_n at real-coordinate points; pairwise-summed over terms."""
    Zr = np.atleast_2d(np.asarray(z, dtype=float))
    if np.any(np.linalg.norm(Zr, axis=1) > 1.0 + 1e-12):
        raise OutsideBall("evaluation point outside the closed unit ball")
    n = series.n_terms if n_terms is None else n_terms
    return _eval_terms(series.terms[:n], to_complex(Zr))


def trace_along_path(path, series, samples_per_segment=50):
    """Profile (t, Re f, |f|, region index n) along a polyline.

    The region index counts how many stored polytopes the point has left;
    the full certified series is evaluated everywhere.
    """
    pts = path.points()
    samples = [pts[:1]]
    for i in range(pts.shape[0] - 1):
        t = np.linspace(0.0, 1.0, samples_per_segment + 1)[1:, None]
        samples.append(pts[i] + t * (pts[i + 1] - pts[i]))
    S = np.vstack(samples)
    nrm = np.linalg.norm(S, axis=1)
    S = S[nrm <= 1.0 - 1e-12]
    arc = np.concatenate(
        [[0.0], np.cumsum(np.linalg.norm(np.diff(S, axis=0), axis=1))]
    )
    f = evaluate_f(S, series)
    region = np.zeros(S.shape[0], dtype=int)
    for P in series.polytopes:
        region += (P.support_values(S) > 0.0).astype(int)
    return {
        "t": arc, "re_f": f.real, "abs_f": np.abs(f), "region": region,
        "max_re": float(f.real.max()) if f.size else 0.0,
    }
