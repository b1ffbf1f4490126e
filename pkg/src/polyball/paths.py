"""Path analysis over a built exhaustion.

Crossing detection against the nested boundaries, skeleton-confinement
length bounds, an adversarial short-path search, and the planar
regular-polygon oracle that exercises the same machinery with closed-form
answers.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._geom import dist_points_to_simplices
from .errors import PathTooShort
from .polytope import ConvexPolytope

#: support-value tolerance for "on the boundary" along a path
CROSSING_TOL = 1e-12


@dataclass(frozen=True)
class PolylinePath:
    """Piecewise-linear path in the closed unit ball.

    exit_point, when set, is a unit vector appended conceptually at
    parameter 1; the polyline itself stays strictly inside.
    """

    vertices: np.ndarray           # (k, d)
    exit_point: np.ndarray | None = None
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def dimension(self):
        return self.vertices.shape[1]

    @property
    def length(self):
        return float(
            np.linalg.norm(np.diff(self.points(), axis=0), axis=1).sum()
        )

    def points(self):
        """Vertices with the exit point appended when present."""
        if self.exit_point is None:
            return self.vertices
        return np.vstack([self.vertices, self.exit_point])


@dataclass(frozen=True)
class Crossing:
    """First passage of the path through one boundary bP_n."""

    index: int                     # 1-based polytope index
    point: np.ndarray
    parameter: float               # arc-length position along the path
    skeleton_distance: float
    in_neighbourhood: bool         # within theta_n of skel(P_n)


@dataclass(frozen=True)
class CrossingReport:
    crossings: tuple
    length_lower_bound: float
    confinement_run: tuple | None  # (first n, last n) of the certified run
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def rows(self):
        """One row per crossing: (n, *point, skeleton distance, inU)."""
        return [
            (c.index, *map(float, c.point), c.skeleton_distance,
             int(c.in_neighbourhood))
            for c in self.crossings
        ]


def _first_crossing(P, pts):
    """First exit of the polyline through bP.

    Returns (point, arc-length parameter) or None.  The exit parameter on
    the crossing segment is the smallest positive hyperplane crossing
    from the inside endpoint, which is exact for a convex body.
    """
    sup = P.support_values(pts)
    arc = np.concatenate(
        [[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))]
    )
    for i in range(pts.shape[0] - 1):
        if sup[i] > CROSSING_TOL or sup[i + 1] <= CROSSING_TOL:
            continue
        a, b = pts[i], pts[i + 1]
        num = P.offsets - a @ P.normals.T
        den = (b - a) @ P.normals.T
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(den > 1e-300, num / den, np.inf)
        t_exit = float(t[t >= -1e-12].min())
        t_exit = min(max(t_exit, 0.0), 1.0)
        x = a + t_exit * (b - a)
        return x, float(arc[i] + t_exit * (arc[i + 1] - arc[i]))
    return None


def analyze_path(path, exh):
    """First crossing of each built boundary plus the confinement bound.

    The certified lower bound sums |x_{n+1} - x_n| over the initial run
    of crossings that stay inside their skeleton neighbourhoods and
    subtracts 2 theta_n per crossing in the run; a crossing outside its
    neighbourhood terminates the run.  Raises PathTooShort when the path
    never leaves the innermost polytope.
    """
    pts = np.atleast_2d(np.asarray(path.points(), dtype=float))
    first = exh.polytopes[0]
    if float(first.support_values(pts[:1])[0]) > CROSSING_TOL:
        raise PathTooShort("path must start inside the innermost polytope")
    crossings = []
    for n, P in enumerate(exh.polytopes, 1):
        hit = _first_crossing(P, pts)
        if hit is None:
            if n == 1:
                raise PathTooShort("path never exits the innermost polytope")
            break
        x, s = hit
        skd = float(
            dist_points_to_simplices(x[None, :], P.skeleton_simplices())[0]
        )
        theta = exh.theta(n)
        crossings.append(Crossing(
            index=n, point=x, parameter=s, skeleton_distance=skd,
            in_neighbourhood=bool(skd <= theta + 1e-12),
        ))
    run_end = 0
    for c in crossings:
        if not c.in_neighbourhood:
            break
        run_end = c.index
    lb = 0.0
    run = None
    if run_end >= 1:
        run = (1, run_end)
        xs = np.array([c.point for c in crossings[:run_end]])
        travel = float(np.linalg.norm(np.diff(xs, axis=0), axis=1).sum())
        lb = max(0.0, travel - 2.0 * float(exh.thetas(run_end).sum()))
    return CrossingReport(
        crossings=tuple(crossings), length_lower_bound=lb,
        confinement_run=run,
        meta={"n_polytopes": len(exh.polytopes), "path_length": path.length},
    )


def _closest_on_simplices(target, simplices):
    """Closest point to `target` over a family of simplices (S, k, d)."""
    S = np.asarray(simplices, dtype=float)
    k = S.shape[1]
    if k == 1:
        d = np.linalg.norm(S[:, 0] - target, axis=1)
        return S[int(np.argmin(d)), 0].copy()
    if k == 2:
        A, B = S[:, 0], S[:, 1]
        AB = B - A
        den = np.einsum("sd,sd->s", AB, AB)
        den = np.where(den < 1e-300, 1.0, den)
        t = np.clip(np.einsum("sd,sd->s", target - A, AB) / den, 0.0, 1.0)
        Q = A + t[:, None] * AB
        d = np.linalg.norm(Q - target, axis=1)
        return Q[int(np.argmin(d))].copy()
    best, bd = None, np.inf
    for tri in S:
        q = _closest_point_triangle(target, tri)
        d = float(np.linalg.norm(q - target))
        if d < bd:
            best, bd = q, d
    return best


def _closest_point_triangle(p, tri):
    """Closest point on a triangle: interior projection or edge clamp."""
    A, B, C = tri
    E = np.stack([B - A, C - A], axis=1)      # (d, 2)
    uv, *_ = np.linalg.lstsq(E, p - A, rcond=None)
    if uv[0] >= 0 and uv[1] >= 0 and uv.sum() <= 1.0:
        return A + E @ uv
    best, bd = None, np.inf
    for a, b in ((A, B), (A, C), (B, C)):
        ab = b - a
        t = np.clip(float((p - a) @ ab / max(ab @ ab, 1e-300)), 0.0, 1.0)
        q = a + t * ab
        d = float(np.linalg.norm(q - p))
        if d < bd:
            best, bd = q, d
    return best


def adversarial_short_path(exh, budget=2000, seed=11):
    """Shortest skeleton-confined path a seeded local search can find.

    Crossing points are constrained to the skeletons themselves, the
    deepest part of every neighbourhood.  Random restarts plus coordinate
    descent (each point moves to the skeleton point closest to the
    midpoint of its neighbours); the best path found can approach but
    never beat the chain divergence bound minus 2 sum theta_n.
    """
    rng = np.random.default_rng(seed)
    skels = [P.skeleton_simplices() for P in exh.polytopes]
    n = len(skels)
    if n < 2:
        raise ValueError("need at least two built polytopes")
    best_pts, best_len = None, np.inf
    spent = 0
    while spent < budget:
        pts = []
        for sk in skels:
            i = int(rng.integers(0, sk.shape[0]))
            w = rng.dirichlet(np.ones(sk.shape[1]))
            pts.append(w @ sk[i])
        pts = np.array(pts)
        prev = np.inf
        while spent < budget:
            for j in range(n):
                if j == 0:
                    target = pts[1]
                elif j == n - 1:
                    target = pts[n - 2]
                else:
                    target = 0.5 * (pts[j - 1] + pts[j + 1])
                pts[j] = _closest_on_simplices(target, skels[j])
            spent += 1
            cur = float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())
            if prev - cur < 1e-12:
                break
            prev = cur
        cur = float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())
        if cur < best_len:
            best_len, best_pts = cur, pts.copy()
    return PolylinePath(
        vertices=best_pts,
        meta={"length": best_len, "iterations": spent, "seed": seed},
    )


def _regular_polygon(k, radius, phase):
    ang = phase + 2.0 * np.pi * np.arange(k) / k
    verts = radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    mid = phase + np.pi * (2.0 * np.arange(k) + 1.0) / k
    normals = np.stack([np.cos(mid), np.sin(mid)], axis=1)
    offsets = np.full(k, radius * np.cos(np.pi / k))
    fvi = tuple((i, (i + 1) % k) for i in range(k))
    return ConvexPolytope(
        normals=normals, offsets=offsets, vertices=verts,
        facet_vertex_indices=fvi,
        meta={"edge_count": k, "circumradius": radius, "phase": phase},
    )


def polygon_pair_oracle_2d(n_blocks, r1=0.5):
    """Planar analogue of the exhaustion with closed-form answers.

    Block j is a pair of regular k_j-gons, the second rotated half a
    step, so their vertex sets are angularly separated by exactly
    pi/k_j; any chain visiting both vertex sets travels at least
    mu_j = 2 r sin(pi/(2 k_j)) at the inner circumradius.  Edge counts
    grow like j^0.7: slowly enough that sum mu_j keeps growing, fast
    enough that the nested circumradii stay below 1.
    """
    from .blocks import Exhaustion

    if n_blocks < 1:
        raise ValueError("need n_blocks >= 1")
    polys, mus, radii = [], [], [r1]
    r = r1
    for j in range(1, n_blocks + 1):
        k = 2 * int(np.ceil(2.0 * (j + 2) ** 0.7))
        half = np.pi / k
        mus.append(2.0 * r * np.sin(0.5 * half))
        polys.append(_regular_polygon(k, r, 0.0))
        # nesting slack shrinks summably so the radii stay below 1
        grow = 1.0 + 0.5 / (j + 3) ** 2
        r = r / np.cos(half) * grow
        polys.append(_regular_polygon(k, r, half))
        r = r / np.cos(half) * grow
        radii.append(r)
    if r >= 1.0:
        raise ValueError("polygon radii exceed the unit disc at this depth")
    edge = 2.0 * r1 * np.sin(np.pi / polys[0].meta["edge_count"])
    exh = Exhaustion(
        blocks=(), polytopes=tuple(polys), radii=np.array(radii),
        sigmas=np.array(mus), theta1=1e-3 * edge,
        constants={
            "M": 2, "L": 1, "mu": 1.0, "lambda": 0.0, "r1": r1,
            "oracle": "regular-polygon-pairs",
        },
        n_blocks=n_blocks,
    )
    return exh


def polygon_oracle_closed_form(exh):
    """Independent chain bound for the polygon oracle: sum of the exact
    vertex-to-vertex separations 2 r_j sin(pi/(2 k_j)) per pair."""
    total = 0.0
    for i in range(0, len(exh.polytopes), 2):
        P = exh.polytopes[i]
        k = P.meta["edge_count"]
        total += 2.0 * P.meta["circumradius"] * np.sin(0.5 * np.pi / k)
    return float(total)
