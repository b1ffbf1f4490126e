"""Skeleton offset families, small and large blocks, and the exhaustion.

A small block stacks M shell polytopes whose window skeletons project
onto M translated copies of the tessellation skeleton; translated so that
the copies have no common point, which forces every chain through them
to travel a definite distance.  Large blocks repeat the small block for a
sphere-covering family of window rotations, and the exhaustion chains
large blocks with a divergent-sum scale schedule.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import polygamma

from ._geom import (
    dist_points_to_simplices,
    greedy_sphere_net,
    rotation_to,
    sample_sphere,
    unit,
)
from .errors import (
    CoverFailure,
    ResolutionExhausted,
    ScheduleInfeasible,
    SweepFailure,
)
from .lattice import Tessellation, cell_facets, delaunay_cells_in_region
from .polytope import ShellPolytopeParams, build_shell_light, choose_rho1

#: intersections closer than this to a lower-dimensional degeneracy retry
TRANSVERSALITY_TOL = 1e-9
#: verification slack applied to the window-cap angular radius
CAP_SLACK = 0.995


@dataclass(frozen=True)
class OffsetFamily:
    """Translates q_0 = 0, q_1 .. q_{M-1} of the tessellation skeleton.

    All data is at lattice scale 1; `scaled` produces the family for a
    scaled lattice.  separation_mu is the certified chain lower bound of
    Lemma-9.3 type: any chain x_i in skel(D(lattice + q_i)) satisfies
    sum |x_i - x_{i-1}| >= separation_mu.
    """

    offsets: np.ndarray          # (M, d) with offsets[0] = 0
    sweep_direction: np.ndarray  # unit vector, (d,)
    sweep_parameters: np.ndarray  # (M-1,) strictly decreasing, positive
    separation_mu: float
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def n_translates(self):
        return self.offsets.shape[0]

    def scaled(self, scale):
        """Family for the homothetic lattice: every length scales."""
        return OffsetFamily(
            offsets=self.offsets * scale,
            sweep_direction=self.sweep_direction.copy(),
            sweep_parameters=self.sweep_parameters * scale,
            separation_mu=self.separation_mu * scale,
            meta=dict(self.meta),
        )


def _skeleton_faces(lattice, offset, pad):
    """Deduplicated (d-1)-faces of the offset tessellation within the
    padded fundamental-parallelotope box."""
    d = lattice.dimension
    tess = Tessellation(lattice, 1.0, np.asarray(offset, dtype=float))
    corners = np.array(
        [np.sum([b * t for b, t in zip(lattice.basis, ts)], axis=0)
         for ts in np.ndindex(*(2,) * d)]
    )
    lo = corners.min(axis=0) - pad
    hi = corners.max(axis=0) + pad
    cells, _ = delaunay_cells_in_region(tess, lo, hi)
    faces = cell_facets(cells)
    key = np.round(faces / 1e-9).astype(np.int64)
    order = np.lexsort(key.transpose(2, 0, 1)[::-1], axis=1)
    key = np.take_along_axis(key, order[:, :, None], axis=1)
    _, idx = np.unique(key.reshape(key.shape[0], -1), axis=0,
                       return_index=True)
    return faces[np.sort(idx)]


def _face_normals(faces):
    """Unit normals of (d-1)-faces in R^d (d = 2 or 3)."""
    if faces.shape[1] == 2:
        e = faces[:, 1] - faces[:, 0]
        n = np.stack([-e[:, 1], e[:, 0]], axis=1)
    else:
        n = np.cross(faces[:, 1] - faces[:, 0], faces[:, 2] - faces[:, 0])
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def _segment_intersections_2d(S0, S1):
    """Pairwise proper intersection points of two segment families.

    Raises SweepFailure on a near-collinear overlapping pair, which the
    caller treats as a failed sweep direction.
    """
    A0, B0 = S0[:, 0], S0[:, 1]
    A1, B1 = S1[:, 0], S1[:, 1]
    r = B0 - A0
    s = B1 - A1
    cross = r[:, None, 0] * s[None, :, 1] - r[:, None, 1] * s[None, :, 0]
    dA = A1[None, :, :] - A0[:, None, :]
    num_t = dA[:, :, 0] * s[None, :, 1] - dA[:, :, 1] * s[None, :, 0]
    num_u = dA[:, :, 0] * r[:, None, 1] - dA[:, :, 1] * r[:, None, 0]
    parallel = np.abs(cross) < 1e-12
    # collinear overlap would make the intersection one-dimensional
    if np.any(parallel & (np.abs(num_t) < TRANSVERSALITY_TOL)):
        raise SweepFailure("collinear overlapping segment pair")
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num_t / cross
        u = num_u / cross
    hit = (~parallel) & (t >= -1e-12) & (t <= 1 + 1e-12) \
        & (u >= -1e-12) & (u <= 1 + 1e-12)
    ti, si = np.nonzero(hit)
    return A0[ti] + t[ti, si, None] * r[ti]


def _tri_plane_clip(tris, normals, offs):
    """Segment of each triangle cut by its paired plane <x|n> = off.

    tris (k, 3, 3), normals (k, 3), offs (k,).  Returns (k, 2, 3) and a
    validity mask (triangles crossing the plane transversely).
    """
    d = np.einsum("kvd,kd->kv", tris, normals) - offs[:, None]
    seg = np.zeros((tris.shape[0], 2, 3))
    ok = np.zeros(tris.shape[0], dtype=bool)
    for k in range(tris.shape[0]):
        dv = d[k]
        pts = []
        for a, b in ((0, 1), (1, 2), (2, 0)):
            if dv[a] * dv[b] < 0:
                t = dv[a] / (dv[a] - dv[b])
                pts.append(tris[k, a] + t * (tris[k, b] - tris[k, a]))
            elif abs(dv[a]) < TRANSVERSALITY_TOL:
                pts.append(tris[k, a])
        if len(pts) >= 2:
            P = np.array(pts)
            # farthest pair (vertices exactly on the plane may duplicate)
            D = np.linalg.norm(P[:, None] - P[None, :], axis=2)
            i, j = np.unravel_index(np.argmax(D), D.shape)
            if D[i, j] > TRANSVERSALITY_TOL:
                seg[k, 0], seg[k, 1] = P[i], P[j]
                ok[k] = True
    return seg, ok


def _tri_tri_segments(S0, S1):
    """Intersection segments of two triangle families in R^3."""
    n0 = _face_normals(S0)
    o0 = np.einsum("kd,kd->k", n0, S0[:, 0])
    n1 = _face_normals(S1)
    o1 = np.einsum("kd,kd->k", n1, S1[:, 0])
    # bounding-box prefilter
    lo0, hi0 = S0.min(axis=1), S0.max(axis=1)
    lo1, hi1 = S1.min(axis=1), S1.max(axis=1)
    overlap = np.all(hi0[:, None] >= lo1[None, :] - 1e-12, axis=2) \
        & np.all(lo0[:, None] <= hi1[None, :] + 1e-12, axis=2)
    ti, ui = np.nonzero(overlap)
    segs = []
    for a, b in zip(ti, ui):
        sa, oka = _tri_plane_clip(S0[a][None], n1[b][None], o1[b][None])
        if not oka[0]:
            continue
        sb, okb = _tri_plane_clip(S1[b][None], n0[a][None], o0[a][None])
        if not okb[0]:
            continue
        # overlap of the two coplanar segments along the common line
        direction = sa[0, 1] - sa[0, 0]
        nd = np.linalg.norm(direction)
        if nd < TRANSVERSALITY_TOL:
            continue
        direction = direction / nd
        t_a = np.sort([0.0, nd])
        t_b = np.sort((sb[0] - sa[0, 0]) @ direction)
        # the clipped segment of the other triangle can sit off the line
        off = sb[0] - sa[0, 0] - ((sb[0] - sa[0, 0]) @ direction)[:, None] * direction
        if np.linalg.norm(off, axis=1).max() > 1e-7:
            continue
        lo = max(t_a[0], t_b[0])
        hi = min(t_a[1], t_b[1])
        if hi - lo > TRANSVERSALITY_TOL:
            segs.append(np.stack([sa[0, 0] + lo * direction,
                                  sa[0, 0] + hi * direction]))
    return np.array(segs) if segs else np.zeros((0, 2, 3))


def _segment_tri_points(segs, tris):
    """Transversal intersection points of segments with triangles."""
    if segs.shape[0] == 0 or tris.shape[0] == 0:
        return np.zeros((0, 3))
    n = _face_normals(tris)
    o = np.einsum("kd,kd->k", n, tris[:, 0])
    A, B = segs[:, 0], segs[:, 1]
    # chunk the (segments, triangles) crossing matrix; at large-lattice
    # sizes it would not fit in memory in one piece
    rows = max(1, int(2 ** 24 // max(tris.shape[0], 1)))
    si_parts, ti_parts = [], []
    for s0 in range(0, segs.shape[0], rows):
        s1 = min(s0 + rows, segs.shape[0])
        da_c = A[s0:s1] @ n.T - o
        db_c = B[s0:s1] @ n.T - o
        i, j = np.nonzero(da_c * db_c < 0)
        si_parts.append(i + s0)
        ti_parts.append(j)
    si = np.concatenate(si_parts)
    ti = np.concatenate(ti_parts)
    if si.size == 0:
        return np.zeros((0, 3))
    da = np.einsum("sd,sd->s", A[si], n[ti]) - o[ti]
    db = np.einsum("sd,sd->s", B[si], n[ti]) - o[ti]
    t = da / (da - db)
    pts = A[si] + t[:, None] * (B[si] - A[si])
    # barycentric membership in the paired triangle
    T = tris[ti]
    v0 = T[:, 1] - T[:, 0]
    v1 = T[:, 2] - T[:, 0]
    w = pts - T[:, 0]
    d00 = np.einsum("kd,kd->k", v0, v0)
    d01 = np.einsum("kd,kd->k", v0, v1)
    d11 = np.einsum("kd,kd->k", v1, v1)
    dw0 = np.einsum("kd,kd->k", w, v0)
    dw1 = np.einsum("kd,kd->k", w, v1)
    den = d00 * d11 - d01 * d01
    u = (d11 * dw0 - d01 * dw1) / den
    v = (d00 * dw1 - d01 * dw0) / den
    inside = (u >= -1e-12) & (v >= -1e-12) & (u + v <= 1 + 1e-12)
    return pts[inside]


def find_skeleton_offsets(lattice, epsilon, seed=7, retries=20):
    """Sweep offsets q_j = t_j q making the translated skeletons disjoint.

    The sweep direction avoids every face-hyperplane direction of the
    tessellation; the iterated intersections then drop one dimension per
    translate, ending empty, which is certified by exhaustive face-pair
    intersection over (a padded copy of) the fundamental parallelotope.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    d = lattice.dimension
    M = d + 1
    pad = 2.5 * lattice.longest_edge
    base = _skeleton_faces(lattice, np.zeros(d), pad)
    normals = _face_normals(base)
    nkey = np.round(normals / 1e-6).astype(np.int64)
    normals = normals[np.unique(np.abs(nkey), axis=0, return_index=True)[1]]
    rng = np.random.default_rng(seed)
    t = epsilon * (M - np.arange(1, M)) / M   # eps > t_1 > ... > t_{M-1} > 0
    last_error = None
    for _ in range(retries):
        # most transversal direction of a random batch; a q nearly
        # parallel to a skeleton face makes the translates almost
        # collinear and ruins the separation bound
        cand = rng.standard_normal((256, d))
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        score = np.abs(cand @ normals.T).min(axis=1)
        q = cand[int(np.argmax(score))]
        if score.max() < 0.02:
            continue
        try:
            fams = [base] + [
                _skeleton_faces(lattice, tj * q, pad) for tj in t
            ]
            if d == 2:
                pts = _segment_intersections_2d(fams[0], fams[1])
                if pts.shape[0] == 0:
                    raise SweepFailure("first intersection already empty")
                final = float(
                    dist_points_to_simplices(pts, fams[2]).min()
                )
            else:
                segs = _tri_tri_segments(fams[0], fams[1])
                if segs.shape[0] == 0:
                    raise SweepFailure("first intersection already empty")
                pts = _segment_tri_points(segs, fams[2])
                if pts.shape[0] == 0:
                    raise SweepFailure("second intersection already empty")
                final = float(
                    dist_points_to_simplices(pts, fams[3]).min()
                )
            if final <= TRANSVERSALITY_TOL:
                raise SweepFailure(
                    "iterated intersection not empty (clearance %.3e)"
                    % final
                )
        except SweepFailure as e:
            last_error = e
            continue
        offsets = np.vstack([np.zeros(d), np.outer(t, q)])
        fam = OffsetFamily(
            offsets=offsets,
            sweep_direction=q,
            sweep_parameters=t.copy(),
            separation_mu=0.0,
            meta={
                "emptiness_clearance": final,
                "intersection_points": pts,
                "epsilon": float(epsilon),
                "seed": int(seed),
            },
        )
        return replace(fam, separation_mu=separation_mu(lattice, fam))
    raise SweepFailure(
        "no valid sweep direction after %d retries: %s"
        % (retries, last_error)
    )


def _sample_faces(faces, h):
    """Points on each face with spacing <= h."""
    if faces.shape[1] == 2:
        A, B = faces[:, 0], faces[:, 1]
        L = np.linalg.norm(B - A, axis=1)
        out = []
        for a, b, ln in zip(A, B, L):
            k = max(int(np.ceil(ln / h)) + 1, 2)
            s = np.linspace(0.0, 1.0, k)
            out.append(a + s[:, None] * (b - a))
        return np.vstack(out)
    out = []
    for T in faces:
        e1 = np.linalg.norm(T[1] - T[0])
        e2 = np.linalg.norm(T[2] - T[0])
        k = max(int(np.ceil(max(e1, e2) / h)) + 1, 2)
        i, j = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
        m = i + j <= k
        u = i[m] / k
        v = j[m] / k
        out.append(T[0] + np.outer(u, T[1] - T[0]) + np.outer(v, T[2] - T[0]))
    return np.vstack(out)


def separation_mu(lattice, family, h=None):
    """Certified chain-length lower bound for the offset family.

    Grid search of G(x) = max_i dist(x, S_i) over the base skeleton
    restricted to one lattice period.  G is a max of 1-Lipschitz
    functions, hence 1-Lipschitz, so the bound gridMin minus the sample
    covering radius is certified; retries at finer h until the slack is
    small against the grid minimum.
    """
    d = lattice.dimension
    diam = lattice.longest_edge
    pad = 2.5 * diam
    base = _skeleton_faces(lattice, np.zeros(d), pad)
    # one period: faces whose centroid has lattice coordinates in [0, 1)
    cent = base.mean(axis=1) @ lattice.basis_inv
    period = base[np.all((cent >= 0.0) & (cent < 1.0), axis=1)]
    others = [
        _skeleton_faces(lattice, off, pad)
        for off in family.offsets[1:]
    ]
    h = diam / 40.0 if h is None else float(h)
    while True:
        pts = _sample_faces(period, h)
        # any chain from x must reach every translate, so its length is
        # at least max_i dist(x, S_i); minimize that over the base skeleton
        G = np.full(pts.shape[0], -np.inf)
        for S in others:
            G = np.maximum(G, dist_points_to_simplices(pts, S))
        grid_min = float(G.min())
        # covering radius of the face samples: h/2 on segments, the
        # sub-triangle circumradius bound on triangles
        slack = 0.5 * h if d == 2 else 1.2 * h
        mu = grid_min - slack
        if mu > 0 and slack <= grid_min / 8.0:
            return mu
        if h <= 1e-3 * diam:
            if mu > 0:
                return mu
            raise ResolutionExhausted(
                "separation grid min %.3e never clears the Lipschitz "
                "slack at h=%.3e" % (grid_min, h)
            )
        h *= 0.5


def window_cap_angle(window):
    """Angular radius of the solid cap covered by W_0 for every radius in
    [R0, 1]: the horizontal bound binds at radius 1, the lower shell
    bound at radius R0."""
    mu0 = window.inner_radii[0]
    lo = (1.0 - window.shell_half_width) / window.base_radius
    return float(min(np.arcsin(min(mu0, 1.0)), np.arccos(min(lo, 1.0))))


def rotation_cover(window, n_samples=100000, seed=13, max_rotations=None):
    """Rotations A_1 = Id, A_2, ... whose rotated windows cover the sphere.

    Pole directions form a greedy farthest-point net at the window cap
    radius (with slack); membership is verified on fresh sphere samples.
    With max_rotations set the net is truncated -- a reduced harness for
    schedule tests, which deliberately gives up full coverage.
    """
    theta = window_cap_angle(window) * CAP_SLACK
    pole = window.pole_direction
    dim = window.dimension
    for attempt in range(5):
        chord = 2.0 * np.sin(0.5 * theta * 0.97 ** attempt)
        cand = sample_sphere(n_samples, dim, seed)
        net = greedy_sphere_net(cand, chord, start=pole)
        if max_rotations is not None:
            return [rotation_to(pole, p) for p in net[:max_rotations]]
        fresh = sample_sphere(n_samples, dim, seed + 1)
        gap, _ = cKDTree(net).query(fresh, k=1)
        if 2.0 * np.arcsin(0.5 * float(gap.max())) <= window_cap_angle(window):
            return [rotation_to(pole, p) for p in net]
    raise CoverFailure("rotation net failed verification after refinement")


@dataclass(frozen=True)
class SmallBlock:
    """M nested shell polytopes in the shell [r - M sigma^2 lam, r]."""

    polytopes: tuple
    sigma: float
    shell: tuple               # (r - M sigma^2 lam, r)
    rotation: np.ndarray       # SO(M), identity when unrotated

    @property
    def size(self):
        return len(self.polytopes)


@dataclass(frozen=True)
class LargeBlock:
    """L rotated small blocks stacked through consecutive subshells."""

    polytopes: tuple           # C_0 .. C_{ML-1} flattened
    rotations: tuple           # A_1 = Id, A_2 .. A_L
    subshell_radii: np.ndarray  # rho_0 .. rho_L
    small_blocks: tuple
    sigma: float
    shell: tuple

    @property
    def size(self):
        return len(self.polytopes)


def _nesting_clearance(inner, outer):
    """Certified clearance of inner subset Int outer for shell polytopes:
    outer's facet offsets all exceed inner's boundary radius bound."""
    return float(outer.offsets.min() - inner.max_vertex_norm())


def build_small_block(r, sigma, lattice, family, window, rotation=None,
                      depth_constant=None, kappa=None, seed=3,
                      rho1_samples=4000):
    """Small block: Q_j at radius r - (M-1-j) sigma^2 lam with skeleton
    offset q_j, all rotated by `rotation`.

    Q_j contains (r - (M-j) sigma^2 lam)B and sits inside
    (r - (M-j-1) sigma^2 lam)B; consecutive nesting is certified through
    facet offsets against the inner radius bound.
    """
    M = window.dimension
    lam = depth_constant
    if lam is None:
        lam = (1.0 + window.gradient_bound ** 2) * \
            lattice.longest_edge ** 2 / window.base_radius
    step = sigma * sigma * lam
    if not window.base_radius < r - M * step < r < 1.0:
        raise ValueError("small block shell leaves (R0, 1)")
    reach = 1.4 * sigma * lattice.longest_edge
    polys = []
    for j in range(M):
        rj = r - (M - 1 - j) * step
        rho1 = choose_rho1(window, rj, sigma, lam, cell_reach=reach,
                           n_samples=rho1_samples, seed=seed + j)
        delta = 0.95 * np.sqrt(2.0 * (1.0 - rho1 / rj))
        params = ShellPolytopeParams(
            r=rj, sigma=sigma, offset=family.offsets[j], rho1=rho1,
            delta=delta, kappa=kappa, depth_constant=lam,
        )
        P = build_shell_light(window, params, lattice, seed=seed + 7 * j)
        if rotation is not None and not np.allclose(rotation, np.eye(M)):
            P = P.rotated(rotation)
        polys.append(P)
    for j in range(1, M):
        c = _nesting_clearance(polys[j - 1], polys[j])
        if c < 1e-10:
            raise ScheduleInfeasible(
                "small-block nesting clearance %.3e at layer %d" % (c, j)
            )
    rot = np.eye(M) if rotation is None else np.asarray(rotation, float)
    return SmallBlock(
        polytopes=tuple(polys), sigma=float(sigma),
        shell=(r - M * step, r), rotation=rot,
    )


def build_large_block(r, sigma, lattice, family, window, rotations,
                      depth_constant=None, kappa=None, seed=3):
    """Large block: small block i in subshell [rho_{i-1}, rho_i] with
    window rotation A_i, flattened to C_{(i-1)M + j} = Q_{ij}."""
    M = window.dimension
    lam = depth_constant
    if lam is None:
        lam = (1.0 + window.gradient_bound ** 2) * \
            lattice.longest_edge ** 2 / window.base_radius
    L = len(rotations)
    step = sigma * sigma * lam
    rho = r - M * step * np.arange(L, -1.0, -1.0)
    blocks = []
    for i in range(L):
        blocks.append(
            build_small_block(
                rho[i + 1], sigma, lattice, family, window,
                rotation=rotations[i], depth_constant=lam, kappa=kappa,
                seed=seed + 101 * i,
            )
        )
    polys = [P for b in blocks for P in b.polytopes]
    for n in range(1, len(polys)):
        c = _nesting_clearance(polys[n - 1], polys[n])
        if c < 1e-10:
            raise ScheduleInfeasible(
                "large-block nesting clearance %.3e at polytope %d" % (c, n)
            )
    return LargeBlock(
        polytopes=tuple(polys), rotations=tuple(rotations),
        subshell_radii=rho, small_blocks=tuple(blocks),
        sigma=float(sigma), shell=(float(rho[0]), float(r)),
    )


def sample_window_chains(small_block, n_chains, rng):
    """Lengths of random skeleton chains through a small block's window.

    Chain point j is drawn on the certified window skeleton of Q_j; the
    projected points sit on the j-th translated tessellation skeleton, so
    every length is at least sigma * separation_mu."""
    pts = []
    for P in small_block.polytopes:
        sk = P.meta["window_skeleton"]
        idx = rng.integers(0, sk.shape[0], n_chains)
        w = rng.dirichlet(np.ones(sk.shape[1]), n_chains)
        pts.append(np.einsum("nk,nkd->nd", w, sk[idx]))
    total = np.zeros(n_chains)
    for j in range(1, len(pts)):
        total += np.linalg.norm(pts[j] - pts[j - 1], axis=1)
    return total


def sigma_cap(window, lattice, depth_constant, kappa):
    """Largest shell scale the window's ladder and margin support."""
    d = lattice.longest_edge
    gap12 = window.inner_radii[2] - window.inner_radii[1]
    s_cut = gap12 / (1.4 * d + np.sqrt(2.0 * depth_constant))
    s_kappa = np.sqrt(0.95 * kappa / depth_constant)
    return float(min(s_cut, s_kappa))


def estimate_shell_facets(sigma, dimension, depth_constant, window):
    """Facet-count estimate for one shell polytope at the given scale.

    Net part from the covering density of S^{dim-1} at the smallest
    admissible delta; lifted part from the cell density under U2."""
    delta_min = 0.95 * sigma * np.sqrt(depth_constant)
    cov = 0.95 * delta_min
    if dimension == 3:
        n_net = 5.8 / cov ** 2
    else:
        n_net = 7.0 / cov ** 3
    mu2 = window.inner_radii[2]
    if dimension == 3:
        n_lift = 2.0 * np.pi * mu2 ** 2 / sigma ** 2
    else:
        n_lift = 4.0 * np.pi * mu2 ** 3 / sigma ** 3
    return float(n_net + n_lift)


@dataclass(frozen=True)
class Exhaustion:
    """Built prefix of the polytope sequence plus its full schedule."""

    blocks: tuple              # built LargeBlocks
    polytopes: tuple           # flattened built P_1, P_2, ...
    radii: np.ndarray          # r_1 .. r_{nBlocks+1}
    sigmas: np.ndarray         # sigma_1 .. sigma_{nBlocks}
    theta1: float
    constants: dict
    n_blocks: int              # scheduled block count

    @property
    def n_built(self):
        return len(self.polytopes)

    def theta(self, n):
        """Skeleton-neighbourhood width of P_n (n is 1-based)."""
        return self.theta1 * 2.0 ** (-float(n))

    def thetas(self, n_max=None):
        n = self.n_built if n_max is None else n_max
        return self.theta1 * 2.0 ** (-np.arange(1.0, n + 1.0))

    def block_of(self, n):
        """1-based large-block index of polytope P_n (1-based)."""
        per = self.constants["M"] * self.constants["L"]
        return (n - 1) // per + 1


def build_exhaustion(lattice, family, window, n_blocks, r1=None, a=4.0,
                     seed=3, kappa=None, max_polytopes=None,
                     max_rotations=None, facet_budget=2.0e6):
    """The exhaustion schedule and its materialized polytope prefix.

    sigma_j = c/(j+a) with c normalized so that sum sigma_j^2 equals
    (1 - r1)/(M L lam) exactly (trigamma tail sum); radii advance by
    r_{j+1} = r_j + M L sigma_j^2 lam, reaching 1 in the limit while
    sum sigma_j diverges harmonically.  Raises `a` and retries when
    sigma_1 violates the shell-scale cap; refuses with a quantified
    diagnostic when a scheduled polytope would exceed the facet budget.
    """
    if n_blocks < 1:
        raise ValueError("need n_blocks >= 1")
    M = window.dimension
    lam = (1.0 + window.gradient_bound ** 2) * \
        lattice.longest_edge ** 2 / window.base_radius
    if kappa is None:
        from .polytope import kappa_margin
        kappa = kappa_margin(window)
    if r1 is None:
        r1 = 0.5 * (window.base_radius + 1.0)
    if not window.base_radius < r1 < 1.0:
        raise ValueError("r1 must lie in (R0, 1)")
    rotations = rotation_cover(window, seed=seed,
                               max_rotations=max_rotations)
    L = len(rotations)
    sigma0 = sigma_cap(window, lattice, lam, kappa)
    target = (1.0 - r1) / (M * L * lam)

    a_try = float(a)
    while True:
        c = np.sqrt(target / float(polygamma(1, a_try + 1.0)))
        sigma1 = c / (1.0 + a_try)
        if sigma1 < sigma0:
            break
        if a_try > 60.0:
            raise ScheduleInfeasible(
                "sigma_1 = %.3e stays above the cap %.3e up to a = %.0f"
                % (sigma1, sigma0, a_try)
            )
        a_try += 2.0

    j = np.arange(1.0, n_blocks + 1.0)
    sigmas = c / (j + a_try)
    radii = np.empty(n_blocks + 1)
    radii[0] = r1
    for k in range(n_blocks):
        radii[k + 1] = radii[k] + M * L * sigmas[k] ** 2 * lam
    if radii[-1] >= 1.0:
        raise ScheduleInfeasible("radial schedule leaves the unit ball")

    worst = float(sigmas[-1])
    est = estimate_shell_facets(worst, M, lam, window)
    if est > facet_budget:
        raise ScheduleInfeasible(
            "scheduled shells need ~%.2e facets at sigma=%.3e "
            "(L=%d, M=%d, delta~%.2e), over the budget %.2e; "
            "the construction is sound but not materializable at this size"
            % (est, worst, L, M, 0.95 * worst * np.sqrt(lam), facet_budget)
        )

    blocks = []
    polys = []
    theta1 = None
    budget = np.inf if max_polytopes is None else int(max_polytopes)
    for k in range(n_blocks):
        if len(polys) >= budget:
            break
        if budget >= len(polys) + M * L:
            blk = build_large_block(
                radii[k + 1], sigmas[k], lattice, family, window,
                rotations, depth_constant=lam, kappa=kappa,
                seed=seed + 1009 * k,
            )
            new = list(blk.polytopes)
            blocks.append(blk)
        else:
            # partial block: build whole small blocks until the budget
            new = []
            step = sigmas[k] ** 2 * lam
            rho = radii[k + 1] - M * step * np.arange(L, -1.0, -1.0)
            for i in range(L):
                if len(polys) + len(new) >= budget:
                    break
                sb = build_small_block(
                    rho[i + 1], sigmas[k], lattice, family, window,
                    rotation=rotations[i], depth_constant=lam,
                    kappa=kappa, seed=seed + 1009 * k + 101 * i,
                )
                new.extend(sb.polytopes)
        polys.extend(new)
        if theta1 is None and new:
            # half the smallest skeleton feature of the first block:
            # the smallest projected facet inradius at scale sigma_1
            theta1 = 0.45 * sigmas[0] * lattice.min_facet_inradius
    if theta1 is None:
        theta1 = 0.45 * sigmas[0] * lattice.min_facet_inradius

    polys = polys[: None if max_polytopes is None else int(max_polytopes)]
    for n in range(1, len(polys)):
        cclear = _nesting_clearance(polys[n - 1], polys[n])
        if cclear < 1e-10:
            raise ScheduleInfeasible(
                "nesting clearance %.3e between P_%d and P_%d"
                % (cclear, n, n + 1)
            )
    return Exhaustion(
        blocks=tuple(blocks), polytopes=tuple(polys),
        radii=radii, sigmas=sigmas, theta1=float(theta1),
        constants={
            "M": M, "L": L, "lambda": float(lam),
            "mu": float(family.separation_mu), "sigma0": float(sigma0),
            "R0": float(window.base_radius), "a": float(a_try),
            "c": float(c), "r1": float(r1), "kappa": float(kappa),
            "seed": int(seed),
        },
        n_blocks=int(n_blocks),
    )


def chain_divergence_lowerbound(exh, from_block, to_block):
    """mu * sum sigma_j over the block range (1-based, inclusive): the
    certified lower bound for window-confined skeleton chains."""
    if from_block > to_block:
        return 0.0
    if from_block < 1 or to_block > exh.n_blocks:
        raise ValueError("block range outside the schedule")
    mu = exh.constants["mu"]
    return float(mu * exh.sigmas[from_block - 1 : to_block].sum())
