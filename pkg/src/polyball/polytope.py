"""Bounded halfspace-intersection polytopes and the shell construction.

A shell polytope lives between two nearby spheres: over a window cap it
coincides with a lifted Delaunay triangulation (so its skeleton there
projects exactly onto the tessellation skeleton), and away from the cap
it is cut by tangent-like hyperplanes through a spherical net.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError, cKDTree

from ._geom import (
    dist_origin_simplices,
    dist_points_to_simplices,
    greedy_sphere_net,
    rotation_to,
    sample_sphere,
)
from .errors import (
    EmptyInterior,
    NetTooCoarse,
    NotOnBoundary,
    ShellViolation,
    Unbounded,
)

BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class ConvexPolytope:
    """Irreducible H-representation with enumerated vertices.

    halfspaces are {y : <y|normal_i> <= offset_i} with unit normals and
    strictly positive offsets (origin interior).  facet_vertex_indices[i]
    lists the vertices lying on hyperplane i.
    """

    normals: np.ndarray      # (n, M)
    offsets: np.ndarray      # (n,)
    vertices: np.ndarray     # (V, M)
    facet_vertex_indices: tuple
    meta: dict = field(default_factory=dict, compare=False, repr=False)
    _skeleton_cache: list = field(default_factory=list, compare=False, repr=False)

    @property
    def dimension(self):
        return self.normals.shape[1]

    @property
    def n_facets(self):
        return self.normals.shape[0]

    @property
    def is_light(self):
        """Halfspace-only representation (no vertex enumeration); boundary
        norms and the window skeleton come from certified meta entries."""
        return bool(self.meta.get("light"))

    def support_values(self, points):
        """max_i (<p|n_i> - a_i) per point; <= 0 inside, 0 on boundary."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        return (P @ self.normals.T - self.offsets).max(axis=1)

    def contains(self, points, tol=0.0):
        return self.support_values(points) <= tol

    def max_vertex_norm(self):
        if self.is_light:
            return float(self.meta["radius_bound"])
        return float(np.linalg.norm(self.vertices, axis=1).max())

    def min_vertex_norm(self):
        if self.is_light:
            # min over bP of |y| equals the smallest facet offset
            return float(self.offsets.min())
        return float(np.linalg.norm(self.vertices, axis=1).min())

    def boundary_norm_range(self):
        """Certified (min, max) of |y| over bP."""
        return self.min_vertex_norm(), self.max_vertex_norm()

    def rotated(self, rotation):
        A = np.asarray(rotation, dtype=float)
        meta = dict(self.meta)
        for key in ("window_skeleton", "net_points"):
            if key in meta:
                meta[key] = meta[key] @ A.T
        if "pole" in meta:
            meta["pole"] = A @ meta["pole"]
        return ConvexPolytope(
            normals=self.normals @ A.T,
            offsets=self.offsets.copy(),
            vertices=self.vertices @ A.T,
            facet_vertex_indices=self.facet_vertex_indices,
            meta=meta,
        )

    def skeleton_simplices(self):
        """The (M-2)-skeleton as simplices: vertices (M=2), facet boundary
        edges (M=3) or facet boundary triangles (M=4, triangulated ridges).

        Built facet-by-facet from the local convex hull of each facet's
        vertex set; cached after the first call.  Light polytopes return
        their certified window skeleton.
        """
        if self.is_light:
            return self.meta["window_skeleton"]
        if self._skeleton_cache:
            return self._skeleton_cache[0]
        M = self.dimension
        if M == 2:
            sk = np.concatenate(
                [self.vertices[list(idx)][:, None, :]
                 for idx in self.facet_vertex_indices], axis=0)
        elif M == 3:
            sk = self._skeleton_edges_3d()
        else:
            out = []
            for idx in self.facet_vertex_indices:
                V = self.vertices[list(idx)]
                origin = V.mean(axis=0)
                C = V - origin
                # orthonormal basis of the facet plane
                _, _, vt = np.linalg.svd(C, full_matrices=False)
                B = vt[: M - 1]
                hull = ConvexHull(C @ B.T)
                out.append(V[hull.simplices])
            sk = np.concatenate(out, axis=0)
        self._skeleton_cache.append(sk)
        return sk

    def _skeleton_edges_3d(self):
        """Facet boundary edges, ordering each polygon by angle around its
        facet normal in one vectorized pass over all facets."""
        counts = np.array([len(idx) for idx in self.facet_vertex_indices])
        fid = np.repeat(np.arange(self.n_facets), counts)
        vidx = np.concatenate(self.facet_vertex_indices)
        V = self.vertices[vidx]
        starts = np.concatenate([[0], np.cumsum(counts)])
        means = np.add.reduceat(V, starts[:-1], axis=0) / counts[:, None]
        N = self.normals
        # per-facet in-plane frame (u, v)
        w = np.zeros_like(N)
        w[np.arange(self.n_facets), np.argmin(np.abs(N), axis=1)] = 1.0
        u = w - np.einsum("fd,fd->f", w, N)[:, None] * N
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        v = np.cross(N, u)
        C = V - means[fid]
        ang = np.arctan2(np.einsum("kd,kd->k", C, v[fid]),
                         np.einsum("kd,kd->k", C, u[fid]))
        order = np.lexsort((ang, fid))
        Vs = V[order]
        nxt = np.arange(Vs.shape[0]) + 1
        nxt[starts[1:] - 1] = starts[:-1]
        return np.stack([Vs, Vs[nxt]], axis=1)

    def facet_local_geometry(self, i):
        """(origin, orthonormal basis (M-1, M), local vertices) of facet i."""
        V = self.vertices[list(self.facet_vertex_indices[i])]
        origin = V.mean(axis=0)
        C = V - origin
        _, _, vt = np.linalg.svd(C, full_matrices=False)
        B = vt[: self.dimension - 1]
        return origin, B, C @ B.T


def _perp_unit(n):
    """A unit vector orthogonal to unit vector n (R^3)."""
    w = np.zeros(3)
    w[int(np.argmin(np.abs(n)))] = 1.0
    w -= (w @ n) * n
    return w / np.linalg.norm(w)


def _boundedness_lp(normals):
    """Unbounded iff some direction u has <n_i|u> <= 0 for all i; found by
    maximizing s subject to n_i . u <= -s over the unit box."""
    n, M = normals.shape
    A = np.hstack([normals, np.ones((n, 1))])
    c = np.zeros(M + 1)
    c[-1] = -1.0
    bounds = [(-1.0, 1.0)] * M + [(0.0, 1.0)]
    res = linprog(c, A_ub=A, b_ub=np.zeros(n), bounds=bounds, method="highs")
    return res.status == 0 and -res.fun > 1e-9


def intersect_halfspaces(halfspaces, assume_bounded=False, meta=None):
    """Canonical polytope from halfspaces [(normal, offset), ...].

    Normals are rescaled to unit length; duplicates merged; the origin
    must be interior (all offsets positive).  Vertex enumeration runs
    through the halfspace-intersection dual hull; the irreducible
    representation keeps exactly the halfspaces whose vertex sets span an
    (M-1)-dimensional face.
    """
    if isinstance(halfspaces, tuple) and len(halfspaces) == 2:
        normals, offsets = halfspaces
        normals = np.asarray(normals, dtype=float)
        offsets = np.asarray(offsets, dtype=float)
    else:
        normals = np.array([np.asarray(h[0], dtype=float) for h in halfspaces])
        offsets = np.array([float(h[1]) for h in halfspaces])
    norms = np.linalg.norm(normals, axis=1)
    if np.any(norms == 0):
        raise EmptyInterior("zero normal")
    normals = normals / norms[:, None]
    offsets = offsets / norms
    if np.any(offsets <= 1e-12):
        raise EmptyInterior("origin not interior: nonpositive offset")

    # merge duplicate halfspaces
    key = np.round(np.hstack([normals, offsets[:, None]]) / 1e-12).astype(np.int64)
    _, keep_idx = np.unique(key, axis=0, return_index=True)
    keep_idx.sort()
    normals = normals[keep_idx]
    offsets = offsets[keep_idx]

    if not assume_bounded and _boundedness_lp(normals):
        raise Unbounded("halfspace normals do not positively span R^M")

    M = normals.shape[1]
    hs = np.hstack([normals, -offsets[:, None]])
    try:
        inter = HalfspaceIntersection(hs, np.zeros(M))
    except QhullError as e:
        if assume_bounded:
            raise Unbounded("halfspace intersection failed: %s" % e) from e
        raise
    pts = inter.intersections
    finite = np.all(np.isfinite(pts), axis=1)
    if not np.all(finite):
        raise Unbounded("non-finite intersection vertex")
    if not assume_bounded and pts.size and np.linalg.norm(pts, axis=1).max() > 1e12:
        raise Unbounded("vertex at effectively infinite distance")
    # dedup vertices; keep the map from raw intersection index to vertex id
    scale = max(1.0, float(np.abs(pts[finite]).max())) if pts[finite].size else 1.0
    key = np.round(pts / (1e-9 * scale)).astype(np.int64)
    ukey, kidx, kinv = np.unique(key, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(kidx)
    rank_of = np.empty_like(order)
    rank_of[order] = np.arange(order.size)
    vid = rank_of[kinv]                  # raw intersection -> vertex id
    vertices = pts[np.sort(kidx)]

    # facet incidence from the dual hull: raw intersection k is the meet
    # of halfspaces inter.dual_facets[k]
    hcount = np.array([len(df) for df in inter.dual_facets])
    hflat = np.concatenate(inter.dual_facets) if inter.dual_facets else np.zeros(0, int)
    vflat = np.repeat(vid, hcount)
    pairs = np.unique(np.stack([hflat, vflat], axis=1), axis=0)
    bounds = np.searchsorted(pairs[:, 0], np.arange(normals.shape[0] + 1))
    counts = np.diff(bounds)
    cand = np.flatnonzero(counts >= M)
    fvi = []
    keep = []
    if cand.size:
        # batched affine-rank test, padded to the largest vertex count
        kmax = int(counts[cand].max())
        pad = np.zeros((cand.size, kmax, M))
        for ci, h in enumerate(cand):
            on = pairs[bounds[h] : bounds[h + 1], 1]
            pad[ci, : on.size] = vertices[on] - vertices[on[0]]
        sv = np.linalg.svd(pad, compute_uv=False)
        ranks = (sv > 1e-9 * scale).sum(axis=1)
        for ci in np.flatnonzero(ranks == M - 1):
            h = int(cand[ci])
            keep.append(h)
            fvi.append(pairs[bounds[h] : bounds[h + 1], 1])
    if not keep:
        raise EmptyInterior("no facets found")
    return ConvexPolytope(
        normals=normals[keep],
        offsets=offsets[keep],
        vertices=vertices,
        facet_vertex_indices=tuple(fvi),
        meta=meta or {},
    )


def skeleton_distance(point, P):
    """Distance from a boundary point to the (M-2)-skeleton of P."""
    point = np.asarray(point, dtype=float)
    if abs(float(P.support_values(point)[0])) > BOUNDARY_TOL * max(
        1.0, np.linalg.norm(point)
    ):
        raise NotOnBoundary("point is not on bP within tolerance")
    return float(dist_points_to_simplices(point[None, :], P.skeleton_simplices())[0])


def skeleton_distance_batch(points, P):
    return dist_points_to_simplices(np.atleast_2d(points), P.skeleton_simplices())


#: marker returned when the theta-neighbourhood covers all of bP
FULL_COVER = "full-cover"


def facet_margin_eta(P, theta, floor=1e-9):
    """Facet margin: points of bP with <y|x_i> > 1 - eta lie within theta
    of the skeleton (offset-1 normalization x_i = n_i / a_i).

    Computed facet by facet: erode each facet by theta inside its own
    hyperplane, enumerate the eroded region's vertices, and take the max
    of every other functional there; eta = 1 - (overall max).  Returns
    FULL_COVER when no facet has a theta-deep region.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    X = P.normals / P.offsets[:, None]
    M = P.dimension
    worst = -np.inf
    any_deep = False
    for j in range(P.n_facets):
        origin, B, local = P.facet_local_geometry(j)
        if M == 2:
            # facet is a segment; deep region = middle part
            t = local[:, 0]
            lo, hi = t.min() + theta, t.max() - theta
            if lo > hi:
                continue
            deep_local = np.array([[lo], [hi]])
        else:
            hull = ConvexHull(local)
            A = hull.equations[:, :-1]
            b = -hull.equations[:, -1]  # A x <= b
            rows = np.linalg.norm(A, axis=1)
            A = A / rows[:, None]
            b = b / rows - theta
            # interior point of the eroded region via Chebyshev center
            nA = A.shape[0]
            res = linprog(
                np.append(np.zeros(M - 1), -1.0),
                A_ub=np.hstack([A, np.ones((nA, 1))]),
                b_ub=b,
                bounds=[(None, None)] * (M - 1) + [(0.0, None)],
                method="highs",
            )
            if res.status != 0 or res.x[-1] <= 1e-12:
                continue
            center = res.x[:-1]
            try:
                hi2 = HalfspaceIntersection(
                    np.hstack([A, -b[:, None]]), center
                )
            except QhullError:
                continue
            deep_local = hi2.intersections
            deep_local = deep_local[np.all(np.isfinite(deep_local), axis=1)]
            if deep_local.shape[0] == 0:
                continue
        any_deep = True
        deep = origin + deep_local @ B
        vals = deep @ X.T  # (k, n)
        vals[:, j] = -np.inf
        worst = max(worst, float(vals.max()))
    if not any_deep:
        return FULL_COVER
    return max(1.0 - worst, floor)


def _window_local(window, points):
    """Coordinates of points in the window frame (pole mapped to e_M)."""
    pole = window.pole_direction
    e = np.zeros(window.dimension)
    e[-1] = 1.0
    if np.allclose(pole, e):
        return np.asarray(points, dtype=float)
    Rot = rotation_to(e, pole)
    return np.asarray(points, dtype=float) @ Rot  # == points @ Rot, Rot^T maps back


def window_membership(window, points, inner_index, shrink=0.0):
    """Whether each point lies in W_i = U_i x (1-nu, 1+nu) for the given
    ladder index (0..3) or the full window (inner_index=None).  A positive
    shrink erodes both constraints by that ambient distance."""
    loc = _window_local(window, np.atleast_2d(points))
    mu = (
        window.window_radius
        if inner_index is None
        else window.inner_radii[inner_index]
    )
    horiz = np.linalg.norm(loc[:, :-1], axis=1) < mu - shrink
    vert = np.abs(loc[:, -1] - 1.0) < window.shell_half_width - shrink
    return horiz & vert


def _cap_support(mu, nu, R, a, b):
    """Support function of {|pi(y)| <= mu, y_M in [1-nu, 1+nu], |y| <= R}
    in direction (a, b) with a = |horizontal part| >= 0, b = vertical.

    Vectorized over (a, b, R).  Returns -inf where the set is empty.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    R = np.broadcast_to(np.asarray(R, dtype=float), a.shape).astype(float)
    tlo, thi = 1.0 - nu, 1.0 + nu
    empty = tlo > R
    best = np.full(a.shape, -np.inf)

    def consider(rho, t, feas):
        nonlocal best
        val = a * rho + b * t
        ok = feas & (rho >= -1e-15) & (rho <= mu + 1e-12) & (t >= tlo - 1e-12) \
            & (t <= thi + 1e-12) & (rho ** 2 + t ** 2 <= R ** 2 + 1e-12)
        best = np.where(ok & (val > best), val, best)

    nrm = np.hypot(a, b)
    nz = nrm > 0
    # unconstrained sphere point
    rho_s = np.where(nz, R * a / np.where(nz, nrm, 1.0), 0.0)
    t_s = np.where(nz, R * b / np.where(nz, nrm, 1.0), tlo)
    consider(rho_s, t_s, ~empty)
    # box corners, clipped to the disc
    for t in (tlo, thi):
        tv = np.full(a.shape, t)
        rho_max = np.sqrt(np.maximum(R ** 2 - tv ** 2, 0.0))
        consider(np.minimum(mu, rho_max), tv, ~empty & (tv <= R))
        consider(np.zeros_like(a), tv, ~empty & (tv <= R))
    # rho = mu edge with free t, clipped
    t_best = np.clip(np.where(b >= 0, thi, tlo), tlo, thi)
    t_clip = np.minimum(t_best, np.sqrt(np.maximum(R ** 2 - mu ** 2, 0.0)))
    consider(np.full(a.shape, mu), t_clip, ~empty & (t_clip >= tlo - 1e-12))
    # sphere arc clipped to t bounds with rho <= mu
    for t in (tlo, thi):
        tv = np.full(a.shape, t)
        rho_arc = np.sqrt(np.maximum(R ** 2 - tv ** 2, 0.0))
        consider(np.minimum(rho_arc, mu), tv, ~empty)
    return best


def kappa_margin(window, n_samples=10000, seed=23, grid=1e-4, cap=0.2):
    """Adversarial estimate of the Prop-8.1-style margin kappa.

    Samples hyperplanes through points of W2 just outside the R-sphere
    that miss W3 intersected with the R-ball, and finds the smallest
    radial overshoot at which such a hyperplane still meets the R-ball;
    kappa is that overshoot minus one grid step (or the cap).
    """
    rng = np.random.default_rng(seed)
    mu2, mu3 = window.inner_radii[2], window.inner_radii[3]
    nu = window.shell_half_width
    R0 = window.base_radius
    R = rng.uniform(R0, 1.0, n_samples)
    # direction inside the W2 cylinder at radius ~R
    rho = rng.uniform(0, mu2, n_samples) * 0.999
    tdir = np.sqrt(np.maximum(R ** 2 - rho ** 2, 1e-12))
    g = rng.uniform(0.0, cap, n_samples)
    xnorm = R + g
    # scale the sphere point radially outward by (R+g)/R
    xa = rho * xnorm / R
    xb = tdir * xnorm / R
    # hyperplane normals: biased around the radial direction
    tau = rng.uniform(0.0, 0.6, n_samples)
    na = xa / xnorm + tau * rng.standard_normal(n_samples)
    nb = xb / xnorm + tau * rng.standard_normal(n_samples)
    nn = np.hypot(na, nb)
    na, nb = na / nn, nb / nn
    c = na * xa + nb * xb
    sup_pos = _cap_support(mu3, nu, R, np.abs(na), nb)
    sup_neg = _cap_support(mu3, nu, R, np.abs(na), -nb)
    misses = (sup_pos < c - 1e-12) | (-sup_neg > c + 1e-12)
    meets_ball = np.abs(c) <= R
    in_w2 = (np.abs(xb - 1.0) < nu) & (xa < mu2)
    viol = misses & meets_ball & in_w2
    if np.any(viol):
        kap = float(g[viol].min()) - grid
    else:
        kap = cap
    return max(np.floor(kap / grid) * grid, grid)


def _icosahedron_faces():
    """Vertices (12, 3) and triangular faces (20, 3) of the unit icosahedron."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    raw = np.array(
        [[0, s1, s2 * phi] for s1 in (-1, 1) for s2 in (-1, 1)]
        + [[s1, s2 * phi, 0] for s1 in (-1, 1) for s2 in (-1, 1)]
        + [[s2 * phi, 0, s1] for s1 in (-1, 1) for s2 in (-1, 1)],
        dtype=float,
    )
    V = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    return V, ConvexHull(V).simplices


def _geodesic_sphere(freq):
    """Subdivided-icosahedron grid on S^2 with 10 freq^2 + 2 points."""
    V, F = _icosahedron_faces()
    pts = [V]
    i, j = np.meshgrid(np.arange(freq + 1), np.arange(freq + 1), indexing="ij")
    mask = (i + j <= freq) & ~(
        ((i == 0) | (j == 0) | (i + j == freq))
        & ((i == 0).astype(int) + (j == 0).astype(int)
           + (i + j == freq).astype(int) >= 2)
    )
    bi, bj = i[mask], j[mask]
    bk = freq - bi - bj
    W = np.stack([bi, bj, bk], axis=1) / float(freq)  # barycentric grid
    for f in F:
        P = W @ V[f]
        pts.append(P / np.linalg.norm(P, axis=1, keepdims=True))
    allp = np.vstack(pts)
    # interior-of-edge points are generated once per adjacent face; dedup
    key = np.round(allp / 1e-9).astype(np.int64)
    _, idx = np.unique(key, axis=0, return_index=True)
    idx.sort()
    return allp[idx]


#: geodesic nets certified once per frequency: freq -> (net, covering chord)
_GEODESIC_CACHE = {}


def _geodesic_net_for(radius):
    """Smallest cached geodesic grid with certified covering chord <= radius."""
    probe = sample_sphere(200000, 3, 20240)

    def certified(freq):
        if freq not in _GEODESIC_CACHE:
            net = _geodesic_sphere(freq)
            cov, _ = cKDTree(net).query(probe, k=1)
            _GEODESIC_CACHE[freq] = (net, float(cov.max()))
        return _GEODESIC_CACHE[freq]

    # covering chord scales like ~0.76/freq; search the exact threshold
    freq = max(1, int(0.76 / radius))
    net, cov = certified(freq)
    while cov > radius:
        freq += 1
        net, cov = certified(freq)
    while freq > 1:
        net2, cov2 = certified(freq - 1)
        if cov2 > radius:
            break
        freq -= 1
        net, cov = net2, cov2
    return net


def _structured_sphere_net(dimension, radius, seed):
    """A net of S^{dim-1} with covering radius (chord) <= radius.

    Exact angular grid on the circle, subdivided-icosahedron grid with a
    sampled covering certificate on S^2, greedy farthest-point net
    elsewhere.
    """
    if dimension == 2:
        step = 2.0 * np.arcsin(min(radius, 2.0) / 2.0)
        k = max(int(np.ceil(2 * np.pi / step)), 3)
        t = np.linspace(0.0, 2 * np.pi, k, endpoint=False)
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    if dimension == 3:
        return _geodesic_net_for(radius)
    cand = sample_sphere(max(300000, int(40.0 / radius ** (dimension - 1))),
                         dimension, seed)
    return greedy_sphere_net(cand, radius)


def sphere_cover_polytope(rho1, r, exclusion_window, delta, dimension=None,
                          seed=11, n_verify=100000):
    """Tangent-net polytope G2 = {y in rB : <y|z_j> <= rho1}.

    The net z_j is a delta-net of the unit sphere minus the (scaled)
    exclusion window directions; net points that barely enter the
    exclusion are kept so coverage is preserved up to its rim.  With no
    exclusion the returned polytope is bounded by the net alone; with an
    exclusion a tangent cap plane at the window pole is added so vertex
    enumeration stays bounded (the shell assembly replaces that region
    with lifted facets).
    """
    if not 0 < rho1 < r:
        raise ValueError("need 0 < rho1 < r")
    if delta >= np.sqrt(2.0 * (1.0 - rho1 / r)):
        raise ValueError("delta must be < sqrt(2(1 - rho1/r))")
    if dimension is None:
        if exclusion_window is None:
            raise ValueError("dimension required without an exclusion window")
        dimension = exclusion_window.dimension
    net = _cover_net(r, exclusion_window, delta, dimension, seed, n_verify)
    halfspaces = [(z, rho1) for z in net]
    meta = {"net_points": net, "rho1": rho1, "r": r, "delta": delta}
    if exclusion_window is not None:
        halfspaces.append((exclusion_window.pole_direction.copy(), r))
        meta["cap_plane"] = True
    return intersect_halfspaces(halfspaces, assume_bounded=False, meta=meta)


def _cover_net(r, exclusion_window, delta, dimension, seed, n_verify):
    """Verified delta-net of the unit sphere minus the scaled exclusion."""
    cover_radius = 0.9 * delta
    net = _structured_sphere_net(dimension, cover_radius, seed)
    if exclusion_window is not None:
        # no net plane may touch the exclusion: its tangent cut would
        # reach into the lifted-facet region.  Coverage right at the rim
        # is repaired below with extra rim points (all outside W2).
        inside = window_membership(exclusion_window, r * net, 2)
        net = net[~inside]
    # covering verification on fresh samples outside the exclusion,
    # with greedy repair near the exclusion rim
    fresh = sample_sphere(n_verify, dimension, seed + 1)
    if exclusion_window is not None:
        fresh = fresh[~window_membership(exclusion_window, r * fresh, 2)]
    if fresh.shape[0]:
        if net.shape[0] == 0:
            raise NetTooCoarse("empty net cannot cover the sphere")
        mind, _ = cKDTree(net).query(fresh, k=1)
        bad = mind > cover_radius
        if np.any(bad):
            extra = greedy_sphere_net(fresh[bad], cover_radius)
            net = np.vstack([net, extra])
            mind, _ = cKDTree(net).query(fresh, k=1)
        if mind.max() > delta:
            raise NetTooCoarse(
                "net of %d points leaves a sample %.3g > delta=%.3g away"
                % (net.shape[0], float(mind.max()), delta)
            )
    return net


@dataclass(frozen=True)
class ShellPolytopeParams:
    r: float
    sigma: float
    offset: np.ndarray
    rho1: float
    delta: float
    kappa: float
    depth_constant: float  # lambda

    def __post_init__(self):
        if self.delta >= np.sqrt(2.0 * (1.0 - self.rho1 / self.r)):
            raise ValueError("delta must be < sqrt(2(1-rho1/r))")
        if self.sigma ** 2 * self.depth_constant >= self.kappa:
            raise ValueError("need sigma^2 * lambda < kappa")


def choose_rho1(window, r, sigma, depth_constant, cell_reach=0.0,
                n_samples=10000, seed=5, floor_clearance=1e-8):
    """Smallest rho1 = r(1 - 2^-k) compatible with the shell.

    Three conditions: rho1 above the shell floor r - sigma^2 lambda;
    tangent planes at rho1-sphere points outside W2 miss W1 within the
    r-ball (sampled support check); and the tangent cut of any such plane
    (angular radius sqrt(2(1-rho1/r))) stays clear of the lifted cells
    over U1, which may stick out by cell_reach.
    """
    mu1, mu2 = window.inner_radii[1], window.inner_radii[2]
    nu = window.shell_half_width
    floor = r - sigma * sigma * depth_constant
    dirs = sample_sphere(n_samples, window.dimension, seed)
    for k in range(1, 60):
        rho1 = r * (1.0 - 2.0 ** (-k))
        if rho1 <= floor + floor_clearance:
            continue
        cut = r * np.sqrt(2.0 * (1.0 - rho1 / r))
        if cut >= (mu2 - mu1) - cell_reach:
            continue
        pts = rho1 * dirs
        outside = ~window_membership(window, pts, 2)
        d = dirs[outside]
        loc = _window_local(window, d)
        a = np.linalg.norm(loc[:, :-1], axis=1)
        b = loc[:, -1]
        sup = _cap_support(mu1, nu, np.full(a.shape, r), a, b)
        if np.all(sup < rho1 - 1e-12):
            return rho1
    raise ShellViolation("no rho1 = r(1-2^-k) satisfies the tangent condition")


def build_shell_polytope(window, params, lattice, surface=None,
                         verify_skeleton_samples=100, seed=3):
    """Shell polytope P = G1 cap G2 of the cap construction.

    G1 collects the supporting hyperplanes of lifted facets whose
    projected cell meets U2; G2 is the sphere-cover polytope with the W2
    exclusion.  Verifies the sandwich (r - lambda sigma^2)B in Int P,
    P in rB, facet identification over U1 and (sampled) skeleton window
    identification.
    """
    from .lattice import Tessellation
    from .lift import build_lifted_surface

    r, sigma = params.r, params.sigma
    lam = params.depth_constant
    rho = r - lam * sigma * sigma
    if surface is None:
        tess = Tessellation(lattice, sigma, params.offset)
        surface = build_lifted_surface(window, tess, r)

    mu1, mu2 = window.inner_radii[1], window.inner_radii[2]
    cell_dist = dist_origin_simplices(surface.cells)
    g1_mask = cell_dist < mu2
    if not np.any(g1_mask):
        raise ShellViolation("no lifted facet meets U2")
    g1_normals = surface.normals[g1_mask]
    g1_offsets = surface.offsets[g1_mask]
    if g1_offsets.min() <= rho:
        raise ShellViolation(
            "lifted facet hyperplane cuts the shell floor: %.12g <= %.12g"
            % (g1_offsets.min(), rho)
        )

    net = _cover_net(r, window, params.delta, window.dimension, seed,
                     n_verify=100000)
    halfspaces = list(zip(g1_normals, g1_offsets)) + [(z, params.rho1) for z in net]
    P = intersect_halfspaces(
        halfspaces,
        meta={
            "r": r, "sigma": sigma, "rho": rho, "rho1": params.rho1,
            "delta": params.delta, "offset": np.asarray(params.offset, float),
            "n_lift_facets": int(g1_mask.sum()), "n_net_facets": int(net.shape[0]),
        },
    )

    vnorms = np.linalg.norm(P.vertices, axis=1)
    if vnorms.min() <= rho + 1e-10:
        raise ShellViolation(
            "inner clearance violated: min vertex norm %.12g vs rho %.12g"
            % (vnorms.min(), rho)
        )
    if vnorms.max() > r + 1e-12:
        raise ShellViolation(
            "outer containment violated: max vertex norm %.12g vs r %.12g"
            % (vnorms.max(), r)
        )

    # facet identification over U1
    inner_mask = np.array(
        [np.all(np.linalg.norm(c, axis=1) <= mu1) for c in surface.cells]
    )
    if np.any(inner_mask):
        want_n = surface.normals[inner_mask]
        want_a = surface.offsets[inner_mask]
        dn = np.linalg.norm(P.normals[None, :, :] - want_n[:, None, :], axis=2)
        da = np.abs(P.offsets[None, :] - want_a[:, None])
        match = (dn < 1e-10) & (da < 1e-10)
        if not np.all(match.any(axis=1)):
            raise ShellViolation("a lifted facet over U1 is missing from P")

    if verify_skeleton_samples:
        err = skeleton_identification_error(
            P, surface, window, verify_skeleton_samples, seed
        )
        if err > BOUNDARY_TOL:
            raise ShellViolation(
                "window skeleton identification error %.3e" % err
            )
    return P


def _cover_net_light(r, window, delta, dimension, seed, n_verify=100000):
    """Shell net with verification restricted to the exclusion rim.

    The base net carries a global covering certificate; dropping the
    points inside W2 can only break coverage within one covering radius
    of the rim, so only samples in that inflated annulus are checked
    (and repaired from outside W2).
    """
    cover_radius = 0.95 * delta
    net = _structured_sphere_net(dimension, cover_radius, seed)
    net = net[~window_membership(window, r * net, 2)]
    if net.shape[0] == 0:
        raise NetTooCoarse("exclusion removed the whole net")
    fresh = sample_sphere(n_verify, dimension, seed + 1)
    rim = window_membership(window, r * fresh, 2, shrink=-2.0 * delta * r)
    rim &= ~window_membership(window, r * fresh, 2)
    sub = fresh[rim]
    if sub.shape[0]:
        mind, _ = cKDTree(net).query(sub, k=1)
        bad = mind > cover_radius
        if np.any(bad):
            extra = greedy_sphere_net(sub[bad], cover_radius)
            net = np.vstack([net, extra])
            mind, _ = cKDTree(net).query(sub, k=1)
        if mind.max() > delta:
            raise NetTooCoarse(
                "rim coverage %.3g > delta=%.3g with %d net points"
                % (float(mind.max()), delta, net.shape[0])
            )
    return net


def build_shell_light(window, params, lattice, surface=None, seed=3):
    """Shell polytope in halfspace-only form with exact window certificates.

    Same G1/G2 construction as build_shell_polytope, without global vertex
    enumeration.  Inner clearance comes from facet offsets, outer
    containment from the net support bound plus an exact exit argument in
    window directions, and the window identification from an exact linear
    certificate: every
    net plane is strictly slack on the lifted vertices over U1, and every
    other lifted hyperplane is slack there by the surface's convexity
    margin, so the lifted facets over U1 and edges over U0 are facets and
    skeleton pieces of P verbatim.  The skeleton over U0 is stored in
    meta["window_skeleton"].
    """
    from .lattice import Tessellation
    from .lift import build_lifted_surface

    r, sigma = params.r, params.sigma
    lam = params.depth_constant
    rho = r - lam * sigma * sigma
    if surface is None:
        tess = Tessellation(lattice, sigma, params.offset)
        surface = build_lifted_surface(window, tess, r)
    mu0, mu1, mu2 = window.inner_radii[:3]
    M = window.dimension

    cell_dist = dist_origin_simplices(surface.cells)
    g1_mask = cell_dist < mu2
    if not np.any(g1_mask):
        raise ShellViolation("no lifted facet meets U2")
    g1_normals = surface.normals[g1_mask]
    g1_offsets = surface.offsets[g1_mask]
    if g1_offsets.min() <= rho + 1e-10:
        raise ShellViolation(
            "lifted facet hyperplane cuts the shell floor: %.12g <= %.12g"
            % (g1_offsets.min(), rho)
        )

    net = _cover_net_light(r, window, params.delta, M, seed)
    if params.rho1 <= rho + 1e-10:
        raise ShellViolation("rho1 too close to the shell floor")

    # identification certificate: net planes strictly slack over U1.
    # A net plane at rho1 only reaches points within the tangent-cut
    # angle arccos(rho1/r) of its direction, so planes further than that
    # (plus margin) from the window cone are slack analytically; the rest
    # are checked exactly on the lifted vertices over U1.
    vmask = np.linalg.norm(surface.cells, axis=2) <= mu1      # (F, M)
    ints = surface.cells_int[vmask]
    if ints.shape[0] == 0:
        raise ShellViolation("no lifted vertex over U1")
    _, uidx = np.unique(ints, axis=0, return_index=True)
    U1v = surface.facets[vmask][uidx]
    theta_cut = np.arccos(min(params.rho1 / r, 1.0))
    theta_u1 = np.arcsin(min(mu1 / float(np.linalg.norm(U1v, axis=1).min()),
                             1.0))
    near = np.arccos(np.clip(net[:, -1], -1.0, 1.0)) \
        <= theta_u1 + theta_cut + 0.01
    worst = -np.inf
    if np.any(near):
        sub = net[near]
        cols = max(1, int(2 ** 24 // max(U1v.shape[0], 1)))
        for c0 in range(0, sub.shape[0], cols):
            worst = max(worst, float((U1v @ sub[c0 : c0 + cols].T).max()))
    net_slack = params.rho1 - worst
    if net_slack <= 1e-12:
        raise ShellViolation(
            "a net plane reaches the lifted surface over U1 (slack %.3e)"
            % net_slack
        )
    if surface.convexity_margin <= 0:
        raise ShellViolation("nonpositive lift convexity margin")

    # outer containment.  Net-covered directions: support bound at the
    # net planes.  Window directions: the kept cells tile the U2 disc
    # (their reach past mu2 is under the window radius), the lifted
    # vertices lie on the r-sphere, and the surface is convex, so every
    # such ray exits through a facet simplex inside the closed r-ball.
    net_bound = params.rho1 / (1.0 - 0.5 * params.delta ** 2)
    if net_bound > r:
        raise ShellViolation(
            "net support bound %.12g exceeds r %.12g" % (net_bound, r)
        )
    if window.window_radius - mu2 <= 1.05 * sigma * lattice.longest_edge:
        raise ShellViolation("U2 too close to the window rim for full tiling")
    sphere_err = float(
        np.abs(np.linalg.norm(surface.facets[g1_mask].reshape(-1, M), axis=1)
               - r).max()
    )
    if sphere_err > 1e-12:
        raise ShellViolation(
            "lifted vertex off the r-sphere by %.3e" % sphere_err
        )

    # window skeleton over U0: lifted sub-simplices with all vertices there
    inner = np.linalg.norm(surface.cells, axis=2) <= mu0      # (F, M)
    pieces = []
    for drop in range(surface.cells.shape[1]):
        keep = np.delete(inner, drop, axis=1).all(axis=1)
        if keep.any():
            pieces.append(np.delete(surface.facets[keep], drop, axis=1))
    if pieces:
        wsk = np.concatenate(pieces, axis=0)
        # each piece is shared by two cells; dedup on an order-insensitive key
        key = np.round(wsk / 1e-9).astype(np.int64)
        order = np.lexsort(key.transpose(2, 0, 1)[::-1], axis=1)
        key = np.take_along_axis(key, order[:, :, None], axis=1)
        _, kidx = np.unique(key.reshape(key.shape[0], -1), axis=0,
                            return_index=True)
        wsk = wsk[np.sort(kidx)]
    else:
        wsk = np.zeros((0, M - 1, M))

    normals = np.vstack([g1_normals, net])
    offsets = np.concatenate(
        [g1_offsets, np.full(net.shape[0], params.rho1)]
    )
    meta = {
        "light": True, "r": r, "sigma": sigma, "rho": rho,
        "rho1": params.rho1, "delta": params.delta,
        "offset": np.asarray(params.offset, float),
        "radius_bound": r, "net_support_bound": net_bound,
        "net_slack_u1": net_slack,
        "n_lift_facets": int(g1_mask.sum()), "n_net_facets": int(net.shape[0]),
        "window_skeleton": wsk, "pole": window.pole_direction.copy(),
    }
    return ConvexPolytope(
        normals=normals, offsets=offsets,
        vertices=np.zeros((0, M)), facet_vertex_indices=(), meta=meta,
    )


def skeleton_identification_error(P, surface, window, n_samples, seed=3):
    """Max distance from lifted U0-skeleton samples to skel(P).

    Samples points on the tessellation skeleton inside U0, lifts them by
    the facet-affine maps, and measures skeleton_distance on bP.
    """
    rng = np.random.default_rng(seed)
    mu0 = window.inner_radii[0]
    d = window.dimension - 1
    # skeleton of the projected tessellation: facet sub-simplices of cells
    cells = surface.cells
    subs = []
    for drop in range(cells.shape[1]):
        subs.append(np.delete(cells, drop, axis=1))
    subs = np.concatenate(subs, axis=0)
    # keep sub-simplices fully inside U0, sample them uniformly
    keep = np.linalg.norm(subs, axis=2).max(axis=1) < mu0
    subs = subs[keep]
    if subs.shape[0] == 0:
        return 0.0
    idx = rng.integers(0, subs.shape[0], n_samples)
    w = rng.dirichlet(np.ones(subs.shape[1]), n_samples)
    pts = np.einsum("nk,nkd->nd", w, subs[idx])
    lifted = surface.lift(pts)
    return float(skeleton_distance_batch(lifted, P).max())
