"""Shared low-level geometry: circumspheres, simplex distances, sphere nets.

Everything here is dimension-agnostic numpy code used by the lattice,
lifting and polytope layers.  Batched variants exist for the hot paths
(skeleton distance queries run over 1e4+ points).
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DomainError


def unit(v):
    n = np.linalg.norm(v)
    if n == 0.0:
        raise DomainError("cannot normalize the zero vector")
    return v / n


def circumsphere(vertices):
    """Circumcenter and circumradius of a d-simplex in R^d.

    vertices: (d+1, d).  Solves 2(v_i - v_0)·c = |v_i|^2 - |v_0|^2.
    Raises numpy.linalg.LinAlgError for degenerate simplices.
    """
    V = np.asarray(vertices, dtype=float)
    A = 2.0 * (V[1:] - V[0])
    b = np.einsum("ij,ij->i", V[1:], V[1:]) - V[0] @ V[0]
    c = np.linalg.solve(A, b)
    return c, float(np.linalg.norm(c - V[0]))


def circumspheres(batch):
    """Batched circumsphere: batch (B, d+1, d) -> centers (B, d), radii (B,)."""
    V = np.asarray(batch, dtype=float)
    A = 2.0 * (V[:, 1:] - V[:, :1])
    b = np.einsum("bij,bij->bi", V[:, 1:], V[:, 1:]) - np.einsum(
        "bj,bj->b", V[:, 0], V[:, 0]
    )[:, None]
    c = np.linalg.solve(A, b[..., None])[..., 0]
    return c, np.linalg.norm(c - V[:, 0], axis=1)


def dist_point_simplex(p, vertices):
    """Euclidean distance from point p to the closed simplex conv(vertices).

    vertices: (k+1, d) with k <= d.  Recursive barycentric projection; exact
    up to floating point for the small k (<= 3) used in this package.
    """
    p = np.asarray(p, dtype=float)
    V = np.asarray(vertices, dtype=float)
    if V.shape[0] == 1:
        return float(np.linalg.norm(p - V[0]))
    E = (V[1:] - V[0]).T  # (d, k)
    # affine projection: minimize |p - V0 - E t|
    t, *_ = np.linalg.lstsq(E, p - V[0], rcond=None)
    bary0 = 1.0 - float(np.sum(t))
    if bary0 >= -1e-12 and np.all(t >= -1e-12):
        return float(np.linalg.norm(p - V[0] - E @ t))
    best = np.inf
    for drop in range(V.shape[0]):
        sub = np.delete(V, drop, axis=0)
        best = min(best, dist_point_simplex(p, sub))
    return best


def dist_origin_simplices(simplices):
    """Distance from the origin to each simplex: (n, k, d) -> (n,).

    Vectorized for segments and triangles; barycentric fallback else.
    """
    S = np.asarray(simplices, dtype=float)
    k = S.shape[1]
    if k == 1:
        return np.linalg.norm(S[:, 0], axis=1)
    z = np.zeros((1, S.shape[2]))
    if k == 2:
        return _points_segments_full(z, S[:, 0], S[:, 1])[0]
    if k == 3:
        return _points_triangles_full(z, S)[0]
    return np.array([dist_point_simplex(z[0], s) for s in S])


def dist_points_segments(points, a, b, chunk=2 ** 22):
    """Min distance from each point to a set of segments.

    points (n, d); a, b (S, d).  Returns (n,) of min over segments.
    """
    P = np.asarray(points, dtype=float)
    A = np.asarray(a, dtype=float)
    B = np.asarray(b, dtype=float)
    n, d = P.shape
    S = A.shape[0]
    if S == 0:
        return np.full(n, np.inf)
    out = np.full(n, np.inf)
    rows = max(1, int(chunk // max(S * d, 1)))
    for i0 in range(0, n, rows):
        out[i0 : i0 + rows] = _points_segments_full(
            P[i0 : i0 + rows], A, B
        ).min(axis=1)
    return out


def _points_segments_full(P, A, B):
    """Full (n, S) distance matrix points x segments."""
    AB = B - A
    den = np.einsum("sd,sd->s", AB, AB)
    den = np.where(den < 1e-300, 1.0, den)
    W = P[:, None, :] - A[None, :, :]  # (n, S, d)
    t = np.clip(np.einsum("rsd,sd->rs", W, AB) / den, 0.0, 1.0)
    diff = W - t[:, :, None] * AB[None, :, :]
    return np.sqrt(np.einsum("rsd,rsd->rs", diff, diff))


def dist_points_triangles(points, tris, chunk=2 ** 21):
    """Min distance from each point to a set of triangles (Ericson regions).

    points (n, d); tris (T, 3, d).  Returns (n,).
    """
    P = np.asarray(points, dtype=float)
    T = np.asarray(tris, dtype=float)
    n, d = P.shape
    m = T.shape[0]
    if m == 0:
        return np.full(n, np.inf)
    out = np.full(n, np.inf)
    rows = max(1, int(chunk // max(m * d, 1)))
    for i0 in range(0, n, rows):
        out[i0 : i0 + rows] = _points_triangles_full(
            P[i0 : i0 + rows], T
        ).min(axis=1)
    return out


def _points_triangles_full(P, T):
    """Full (n, T) distance matrix points x triangles."""
    A, B, C = T[:, 0], T[:, 1], T[:, 2]
    ab = B - A
    ac = C - A
    Pc = P[:, None, :]  # (n, 1, d)
    ap = Pc - A
    d1 = np.einsum("tD,rtD->rt", ab, ap)
    d2 = np.einsum("tD,rtD->rt", ac, ap)
    bp = Pc - B
    d3 = np.einsum("tD,rtD->rt", ab, bp)
    d4 = np.einsum("tD,rtD->rt", ac, bp)
    cp = Pc - C
    d5 = np.einsum("tD,rtD->rt", ab, cp)
    d6 = np.einsum("tD,rtD->rt", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    denom = va + vb + vc
    denom = np.where(np.abs(denom) < 1e-300, 1.0, denom)
    v = vb / denom
    w = vc / denom
    # interior candidate
    Q = A + v[:, :, None] * ab + w[:, :, None] * ac
    inside = (v >= -1e-12) & (w >= -1e-12) & (v + w <= 1.0 + 1e-12)
    dq = np.einsum("rtD,rtD->rt", Pc - Q, Pc - Q)
    dq = np.where(inside, dq, np.inf)
    # edge candidates
    for (S0, SV, num, den) in (
        (A, ab, d1, d1 - d3),
        (A, ac, d2, d2 - d6),
        (B, C - B, d4 - d3, (d4 - d3) + (d5 - d6)),
    ):
        den_s = np.where(np.abs(den) < 1e-300, 1.0, den)
        t = np.clip(num / den_s, 0.0, 1.0)
        E = S0 + t[:, :, None] * SV
        de = np.einsum("rtD,rtD->rt", Pc - E, Pc - E)
        dq = np.minimum(dq, de)
    return np.sqrt(dq)


def dist_points_to_simplices(points, simplices):
    """Dispatch on simplex vertex count (2 -> segments, 3 -> triangles)."""
    S = np.asarray(simplices, dtype=float)
    if S.shape[1] == 2:
        return dist_points_segments(points, S[:, 0], S[:, 1])
    if S.shape[1] == 3:
        return dist_points_triangles(points, S)
    P = np.atleast_2d(points)
    return np.array([min(dist_point_simplex(p, s) for s in S) for p in P])


def simplex_inradius(vertices):
    """Inradius of a full-dimensional simplex: d·V / surface area."""
    V = np.asarray(vertices, dtype=float)
    d = V.shape[1]
    vol = abs(np.linalg.det(V[1:] - V[0])) / math.factorial(d)
    area = 0.0
    for drop in range(d + 1):
        F = np.delete(V, drop, axis=0)
        E = F[1:] - F[0]
        G = E @ E.T
        area += np.sqrt(max(np.linalg.det(G), 0.0)) / math.factorial(d - 1)
    return d * vol / area


def rotation_to(pole, target):
    """Rotation matrix in SO(d) mapping unit vector pole to unit vector target.

    Identity outside span(pole, target).
    """
    p = unit(np.asarray(pole, dtype=float))
    t = unit(np.asarray(target, dtype=float))
    c = float(np.clip(p @ t, -1.0, 1.0))
    v = t - c * p
    nv = np.linalg.norm(v)
    d = p.shape[0]
    if nv < 1e-15:
        if c > 0:
            return np.eye(d)
        # antipodal: rotate by pi in any plane containing p
        w = np.zeros(d)
        w[int(np.argmin(np.abs(p)))] = 1.0
        v = unit(w - (w @ p) * p)
        return _plane_rotation(p, v, np.pi)
    v = v / nv
    s = nv
    return _plane_rotation_cs(p, v, c, s)


def _plane_rotation_cs(u, v, c, s):
    d = u.shape[0]
    R = np.eye(d)
    R += (c - 1.0) * (np.outer(u, u) + np.outer(v, v))
    R += s * (np.outer(v, u) - np.outer(u, v))
    return R


def _plane_rotation(u, v, angle):
    return _plane_rotation_cs(u, v, np.cos(angle), np.sin(angle))


def sample_sphere(n, dim, seed):
    """n deterministic quasi-uniform points on S^{dim-1} in R^dim."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, dim))
    nrm = np.linalg.norm(x, axis=1, keepdims=True)
    nrm[nrm == 0] = 1.0
    return x / nrm


def greedy_sphere_net(candidates, radius, start=None):
    """Greedy farthest-point net on the sphere.

    Adds candidate points until every candidate is within `radius`
    (Euclidean chord) of some net point.  Returns the net (k, d).
    """
    C = np.asarray(candidates, dtype=float)
    if C.shape[0] == 0:
        return np.zeros((0, C.shape[1]))
    if start is None:
        net = [C[0]]
    else:
        net = [np.asarray(s, dtype=float) for s in np.atleast_2d(start)]
    mind = np.full(C.shape[0], np.inf)
    for p in net:
        mind = np.minimum(mind, np.linalg.norm(C - p, axis=1))
    while True:
        i = int(np.argmax(mind))
        if mind[i] <= radius:
            break
        net.append(C[i])
        mind = np.minimum(mind, np.linalg.norm(C - C[i], axis=1))
    return np.array(net)


def sample_simplices(simplices, n_per, rng):
    """Uniform samples inside each simplex: (S, k, d) -> (S*n_per, d)."""
    S = np.asarray(simplices, dtype=float)
    s, k, d = S.shape
    w = rng.dirichlet(np.ones(k), size=(s, n_per))  # (s, n_per, k)
    pts = np.einsum("snk,skd->snd", w, S)
    return pts.reshape(s * n_per, d)
