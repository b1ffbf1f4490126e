"""Generic lattices in R^{M-1} and their Delaunay tessellations.

A generic lattice is the integer span of a slightly perturbed canonical
basis.  Genericity (no M+1 lattice points on a common (M-2)-sphere within
the verification window) makes every Delaunay cell a simplex and gives a
positive empty-ball margin eta: every circumball can be enlarged by eta
and still contain no lattice point besides its vertices.  By periodicity
the whole tessellation is described by finitely many representative
simplices modulo lattice translation.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay

from ._geom import circumsphere, circumspheres, dist_points_to_simplices
from .errors import DegenerateLattice, GenericityFailure

#: half-width (in integer coordinates) of the genericity verification window
GENERICITY_WINDOW = 2
#: half-width of the construction window; must exceed GENERICITY_WINDOW so
#: that circumballs of window cells are surrounded by sampled points
BUILD_WINDOW = 4
#: cosphericity rejection tolerance, in circumradius units
COSPHERICITY_TOL = 1e-7
#: empty-ball margin below this is treated as degenerate
MARGIN_TOL = 1e-9
#: safety factor absorbing floating-point slack in downstream consumers
ETA_SAFETY = 0.9


@dataclass(frozen=True)
class GenericLattice:
    """Perturbed-basis lattice with its Delaunay data.

    representative_simplices holds integer lattice coordinates, one row of
    vertex tuples per equivalence class of Delaunay cells modulo
    translation; real coordinates are recovered via `coords @ basis`.
    """

    dimension: int
    basis: np.ndarray                   # (d, d), rows are basis vectors
    perturbation_magnitude: float
    seed: int
    representative_simplices: np.ndarray  # (ell, d+1, d) ints
    empty_ball_margin: float            # eta (raw margin * ETA_SAFETY)
    raw_margin: float
    longest_edge: float                 # d in the shell-depth constant
    basis_inv: np.ndarray = field(repr=False, default=None)

    def points(self, int_coords):
        return np.asarray(int_coords, dtype=float) @ self.basis

    def to_lattice_coords(self, points):
        return np.asarray(points, dtype=float) @ self.basis_inv

    @property
    def min_facet_inradius(self):
        """Smallest inradius over facets of representative cells.

        For 2-D cells facets are edges (inradius := half length); for 3-D
        cells facets are triangles.  Used to size skeleton neighbourhoods.
        """
        best = np.inf
        for rep in self.representative_simplices:
            V = self.points(rep)
            for drop in range(V.shape[0]):
                F = np.delete(V, drop, axis=0)
                if F.shape[0] == 2:
                    best = min(best, 0.5 * float(np.linalg.norm(F[1] - F[0])))
                else:
                    # triangle inradius = 2*area / perimeter
                    a = np.linalg.norm(F[1] - F[0])
                    b = np.linalg.norm(F[2] - F[1])
                    c = np.linalg.norm(F[0] - F[2])
                    s = 0.5 * (a + b + c)
                    area2 = max(s * (s - a) * (s - b) * (s - c), 0.0)
                    best = min(best, 2.0 * np.sqrt(area2) / (a + b + c))
        return best


@dataclass(frozen=True)
class Tessellation:
    """The scaled, offset Delaunay tessellation of a generic lattice.

    Cells are exactly scale*(S + offset) for S ranging over the Delaunay
    cells of the unit-scale lattice; points are scale*(n @ basis + offset)
    for integer n.
    """

    lattice: GenericLattice
    scale: float
    offset: np.ndarray

    def cell_vertices(self, int_coords):
        """Real vertices of the cell(s) with the given integer coordinates."""
        pts = np.asarray(int_coords, dtype=float) @ self.lattice.basis
        return self.scale * (pts + self.offset)


def _integer_window(dim, half):
    rng = range(-half, half + 1)
    return np.array(list(itertools.product(rng, repeat=dim)), dtype=int)


def _window_cells(basis, half, keep_half):
    """Delaunay cells of the integer window whose vertices stay within
    keep_half in integer coordinates.  Returns (cells_int, points_int)."""
    ints = _integer_window(basis.shape[0], half)
    pts = ints @ basis
    tri = Delaunay(pts)
    cells = []
    for simp in tri.simplices:
        vs = ints[simp]
        if np.all(np.abs(vs) <= keep_half):
            cells.append(vs)
    return np.array(cells, dtype=int), ints


def _canonicalize(cells_int):
    """Reduce each cell modulo lattice translation and deduplicate.

    The barycenter is reduced into the fundamental parallelotope by
    flooring its integer coordinates; vertices are then sorted
    lexicographically so translates compare equal.
    """
    reps = {}
    for vs in cells_int:
        bary = vs.mean(axis=0)
        shift = np.floor(bary).astype(int)
        canon = vs - shift
        key = tuple(sorted(map(tuple, canon)))
        reps.setdefault(key, np.array(sorted(map(tuple, canon)), dtype=int))
    return np.array(list(reps.values()), dtype=int)


def _check_genericity_2d(ints, basis):
    """Brute-force cosphericity check: no 4 window points concyclic.

    Iterates over all point triples, builds the circumcircle, and rejects
    if any fourth point lies on it within COSPHERICITY_TOL of the radius.
    Near-collinear triples carry no circle and are skipped.
    """
    pts = ints @ basis
    n = pts.shape[0]
    idx = np.array(list(itertools.combinations(range(n), 3)))
    tri = pts[idx]  # (K, 3, 2)
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    scale = np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1)
    ok = np.abs(det) > 1e-9 * scale
    centers, radii = circumspheres(tri[ok])
    dists = np.linalg.norm(pts[None, :, :] - centers[:, None, :], axis=2)
    on_sphere = np.abs(dists - radii[:, None]) < COSPHERICITY_TOL * radii[:, None]
    counts = on_sphere.sum(axis=1)
    if np.any(counts > 3):
        k = int(np.argmax(counts))
        raise GenericityFailure(
            "found %d near-concyclic window points (circumradius %.6g)"
            % (int(counts[k]), float(radii[k]))
        )


def _check_genericity_delaunay(cells_int, ints, basis):
    """Cosphericity check via Delaunay circumspheres.

    In dimension 3 full subset enumeration over the window is out of desk
    scale; a degenerate cospherical configuration always shows up as a
    window point (near-)on some Delaunay cell's circumsphere, which is
    what this checks.
    """
    pts = ints @ basis
    centers, radii = circumspheres(
        np.asarray(cells_int, dtype=float) @ basis
    )
    for vs, c, R in zip(cells_int, centers, radii):
        d = np.linalg.norm(pts - c, axis=1)
        on = np.abs(d - R) < COSPHERICITY_TOL * R
        if int(on.sum()) > vs.shape[0]:
            raise GenericityFailure(
                "window point within %.1e of a Delaunay circumsphere "
                "(radius %.6g)" % (COSPHERICITY_TOL * R, R)
            )


def _margin_of_rep(lattice_basis, basis_inv, rep):
    """(distance from circumcenter to nearest non-vertex lattice point)
    minus circumradius, enumerating all lattice points within 3 radii."""
    V = np.asarray(rep, dtype=float) @ lattice_basis
    c, R = circumsphere(V)
    # integer box covering the 3R ball around c
    c_lat = c @ basis_inv
    reach = 3.0 * R * np.linalg.norm(basis_inv, ord=2)
    lo = np.floor(c_lat - reach).astype(int)
    hi = np.ceil(c_lat + reach).astype(int)
    axes = [np.arange(l, h + 1) for l, h in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    pts = grid @ lattice_basis
    d = np.linalg.norm(pts - c, axis=1)
    near = d <= 3.0 * R
    vertex = np.zeros(grid.shape[0], dtype=bool)
    rep_set = {tuple(v) for v in rep}
    for i, g in enumerate(grid):
        if tuple(g) in rep_set:
            vertex[i] = True
    others = d[near & ~vertex]
    return float(others.min() - R), R


def build_generic_basis(dimension, perturbation_magnitude, seed):
    """Build a GenericLattice with a verified genericity certificate.

    The canonical basis is perturbed by seeded offsets of norm at most
    perturbation_magnitude per vector.  Deterministic for a fixed seed.
    Raises GenericityFailure when a near-cospherical configuration
    survives (e.g. perturbation 0) -- retry with a new seed or larger
    perturbation.
    """
    if dimension < 2:
        raise GenericityFailure("dimension must be >= 2")
    if perturbation_magnitude < 0:
        raise GenericityFailure("perturbation magnitude must be >= 0")
    rng = np.random.default_rng(seed)
    delta = rng.uniform(-1.0, 1.0, size=(dimension, dimension))
    basis = np.eye(dimension) + perturbation_magnitude * delta / np.sqrt(dimension)
    basis_inv = np.linalg.inv(basis)

    cells_int, ints_build = _window_cells(basis, BUILD_WINDOW, GENERICITY_WINDOW)
    ints_gen = _integer_window(dimension, GENERICITY_WINDOW)
    if dimension == 2:
        _check_genericity_2d(ints_gen, basis)
    else:
        _check_genericity_delaunay(cells_int, ints_build, basis)

    reps = _canonicalize(cells_int)

    margins = []
    radii = []
    for rep in reps:
        m, R = _margin_of_rep(basis, basis_inv, rep)
        margins.append(m)
        radii.append(R)
    raw = float(min(margins))
    if raw <= MARGIN_TOL:
        raise GenericityFailure(
            "empty-ball margin %.3e below tolerance; lattice degenerate" % raw
        )

    edges = []
    for rep in reps:
        V = np.asarray(rep, dtype=float) @ basis
        for i, j in itertools.combinations(range(V.shape[0]), 2):
            edges.append(np.linalg.norm(V[i] - V[j]))
    return GenericLattice(
        dimension=dimension,
        basis=basis,
        perturbation_magnitude=float(perturbation_magnitude),
        seed=int(seed),
        representative_simplices=reps,
        empty_ball_margin=ETA_SAFETY * raw,
        raw_margin=raw,
        longest_edge=float(max(edges)),
        basis_inv=basis_inv,
    )


def empty_ball_margin(lattice):
    """Recompute the raw empty-ball margin by brute-force enumeration.

    Returns the largest eta' such that every representative circumball
    enlarged by eta' stays empty; the lattice stores ETA_SAFETY times
    this value.  Raises DegenerateLattice at or below tolerance.
    """
    margins = [
        _margin_of_rep(lattice.basis, lattice.basis_inv, rep)[0]
        for rep in lattice.representative_simplices
    ]
    raw = float(min(margins))
    if raw <= MARGIN_TOL:
        raise DegenerateLattice("empty-ball margin %.3e <= tolerance" % raw)
    return raw


def voronoi_cell_origin(lattice):
    """Voronoi cell of the origin as a bounded halfspace intersection.

    Intersects the bisector halfspaces K(x, |x|^2/2) over the neighbour
    set E = {sum n_i e_i : -1 <= n_i <= 1} minus the origin.
    """
    from .polytope import intersect_halfspaces

    ints = _integer_window(lattice.dimension, 1)
    ints = ints[np.any(ints != 0, axis=1)]
    pts = ints @ lattice.basis
    norms = np.linalg.norm(pts, axis=1)
    normals = pts / norms[:, None]
    offsets = norms / 2.0
    return intersect_halfspaces(list(zip(normals, offsets)))


def _translate_range(tess, lo, hi):
    """Integer translate box whose cells can meet the region [lo, hi]."""
    lat = tess.lattice
    corners = np.array(list(itertools.product(*zip(lo, hi))))
    lat_corners = (corners / tess.scale - tess.offset) @ lat.basis_inv
    spread = np.abs(lat.representative_simplices).max() + 1
    wlo = np.floor(lat_corners.min(axis=0)).astype(int) - spread
    whi = np.ceil(lat_corners.max(axis=0)).astype(int) + spread
    axes = [np.arange(l, h + 1) for l, h in zip(wlo, whi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(
        -1, lat.dimension
    )


def delaunay_cells_in_region(tess, lo, hi):
    """Every cell of the scaled/offset tessellation meeting the box [lo, hi].

    Returns (cells_real, cells_int): (n, M, M-1) float vertices and the
    corresponding integer lattice coordinates.  A cell is kept when its
    bounding box overlaps the region box.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    lat = tess.lattice
    W = _translate_range(tess, lo, hi)  # (K, d)
    reps = lat.representative_simplices  # (ell, M, d)
    all_int = reps[None, :, :, :] + W[:, None, None, :]  # (K, ell, M, d)
    K, ell, M, d = all_int.shape
    all_int = all_int.reshape(K * ell, M, d)
    real = tess.scale * (all_int.astype(float) @ lat.basis + tess.offset)
    bmin = real.min(axis=1)
    bmax = real.max(axis=1)
    keep = np.all(bmax >= lo, axis=1) & np.all(bmin <= hi, axis=1)
    return real[keep], all_int[keep]


def delaunay_cells_in_ball(tess, center, radius):
    """Cells meeting the closed ball; box prefilter + exact simplex distance."""
    center = np.asarray(center, dtype=float)
    lo = center - radius
    hi = center + radius
    real, ints = delaunay_cells_in_region(tess, lo, hi)
    if real.shape[0] == 0:
        return real, ints
    keep = np.array(
        [_dist_point_cell(center, cell) <= radius for cell in real]
    )
    return real[keep], ints[keep]


def _dist_point_cell(p, cell):
    from ._geom import dist_point_simplex

    return dist_point_simplex(p, cell)


def cell_facets(cells):
    """All boundary facets of the given cells: (n, M, d) -> (n*M, M-1, d)."""
    cells = np.asarray(cells, dtype=float)
    n, M, d = cells.shape
    out = []
    for drop in range(M):
        out.append(np.delete(cells, drop, axis=1))
    return np.concatenate(out, axis=0)


def skeleton_distance_lattice(points, tess):
    """Distance from point(s) to the skeleton of the tessellation.

    Accepts a single point (d,) or a batch (n, d); returns a float or an
    (n,) array.  The skeleton is the union of cell boundaries; only cells
    within two cell diameters of the query box need to be considered.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    margin = 2.5 * tess.scale * tess.lattice.longest_edge
    lo = P.min(axis=0) - margin
    hi = P.max(axis=0) + margin
    cells, _ = delaunay_cells_in_region(tess, lo, hi)
    facets = cell_facets(cells)
    d = dist_points_to_simplices(P, facets)
    if np.asarray(points).ndim == 1:
        return float(d[0])
    return d
