"""Lifting lattice triangulations onto sphere caps as convex surfaces.

The cap of the sphere of radius r over a window U in the hyperplane
x_M = 0 is the graph of psi_r(x) = sqrt(r^2 - |x|^2).  Lifting the
vertices of a Delaunay tessellation of U and extending affinely over
each cell produces a convex polyhedral surface provided the tessellation
scale is small relative to the lattice's empty-ball margin; this module
certifies that convexity exhaustively, certifies the Lipschitz bound
under which lifted circumspheres project close to flat ones, and
computes the shell-depth constants.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ._geom import dist_point_simplex
from .errors import ConvexityViolation, DomainError, NoPositiveOmega, SingularSystem
from .lattice import delaunay_cells_in_region

#: resolution of the binary search for the Lipschitz bound
OMEGA_RESOLUTION = 1e-4
#: grid step for the window-radius search
WINDOW_GRID_STEP = 0.01


def psi(r, x):
    """Height of the radius-r sphere over x: sqrt(r^2 - |x|^2)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = r * r - float(x @ x)
    if s <= 0:
        raise DomainError("psi undefined at |x| >= r")
    return float(np.sqrt(s))


def psi_batch(r, xs):
    xs = np.asarray(xs, dtype=float)
    s = r * r - np.einsum("...d,...d->...", xs, xs)
    if np.any(s <= 0):
        raise DomainError("psi undefined at |x| >= r")
    return np.sqrt(s)


def grad_psi(r, x):
    """Gradient of psi_r: -x / psi_r(x)."""
    return -np.asarray(x, dtype=float) / psi(r, x)


def depth_bound(r, gamma):
    """Radius of the largest ball missed by the hull of a gamma-diameter
    boundary set: r - gamma^2 / r."""
    if not 0 <= gamma < r:
        raise DomainError("need 0 <= gamma < r")
    return r - gamma * gamma / r


@dataclass(frozen=True)
class LiftConstants:
    """Certified Lipschitz bound and the shell-depth constant.

    depth_constant = (1 + omega^2) * d^2 / R0 bounds how far below the
    sphere a lifted facet can cut, in units of scale^2.
    """

    lipschitz_bound: float
    depth_constant: float

    @classmethod
    def from_lattice(cls, omega, lattice, base_radius):
        d = lattice.longest_edge
        return cls(
            lipschitz_bound=float(omega),
            depth_constant=(1.0 + omega * omega) * d * d / base_radius,
        )


@dataclass(frozen=True)
class CapWindow:
    """Window geometry for one sphere cap.

    The window is U x (1-nu, 1+nu) with U the open ball of radius
    window_radius in the first M-1 coordinates; inner_radii is the
    increasing ladder mu_0 < mu_1 < mu_2 < mu_3 < window_radius used by
    the shell-polytope construction.  pole_direction defaults to e_M.
    """

    dimension: int
    window_radius: float
    shell_half_width: float
    inner_radii: tuple
    base_radius: float
    pole_direction: np.ndarray = None

    def __post_init__(self):
        mu = list(self.inner_radii) + [self.window_radius]
        if not all(a < b for a, b in zip(mu, mu[1:])) or mu[0] <= 0:
            raise DomainError("inner radii must satisfy 0 < mu0 < ... < mu_w")
        if len(self.inner_radii) != 4:
            raise DomainError("need exactly four inner radii")
        if not 0 < self.base_radius < 1:
            raise DomainError("base radius must lie in (0, 1)")
        if self.window_radius ** 2 + (1 - self.shell_half_width) ** 2 >= self.base_radius ** 2:
            raise DomainError(
                "window bottom must lie inside the base ball: "
                "mu_w^2 + (1-nu)^2 < R0^2"
            )
        if self.pole_direction is None:
            pole = np.zeros(self.dimension)
            pole[-1] = 1.0
            object.__setattr__(self, "pole_direction", pole)

    @property
    def gradient_bound(self):
        """sup over |x| <= mu_w, r in (R0, 1) of |grad psi_r(x)|."""
        return self.window_radius / np.sqrt(
            self.base_radius ** 2 - self.window_radius ** 2
        )

    @property
    def ladder_gap(self):
        mu = list(self.inner_radii) + [self.window_radius]
        return min(b - a for a, b in zip(mu, mu[1:]))

    @property
    def cap_angular_radius(self):
        """Angular radius of the boundary-sphere cap covered by the window
        through mu_0 (used by the rotation cover)."""
        return float(np.arcsin(min(self.inner_radii[0], 1.0)))

    @classmethod
    def from_gradient_bound(cls, dimension, omega, base_radius,
                            fractions=(0.4, 0.55, 0.7, 0.85)):
        """Largest grid window radius with closed-form gradient <= omega."""
        target = base_radius * omega / np.sqrt(1.0 + omega * omega)
        mu_w = np.floor(target / WINDOW_GRID_STEP) * WINDOW_GRID_STEP
        if mu_w <= 0:
            raise DomainError("omega too small for any window at this grid")
        nu = 1.0 - 0.99 * np.sqrt(base_radius ** 2 - mu_w ** 2)
        return cls(
            dimension=dimension,
            window_radius=float(mu_w),
            shell_half_width=float(nu),
            inner_radii=tuple(f * mu_w for f in fractions),
            base_radius=float(base_radius),
        )

    def rotated(self, rotation):
        return CapWindow(
            dimension=self.dimension,
            window_radius=self.window_radius,
            shell_half_width=self.shell_half_width,
            inner_radii=self.inner_radii,
            base_radius=self.base_radius,
            pole_direction=np.asarray(rotation, dtype=float) @ self.pole_direction,
        )


def projected_circumsphere(simplex_vertices, heights):
    """Circumsphere of the lifted simplex, solved per the two systems.

    simplex_vertices: (M, M-1); heights: (M,).  The heights are first
    normalized so the last vertex has height 0 (which leaves the
    projection unchanged).  Returns a dict with the sphere center z in
    R^M, its radius, the hyperplane normal w0 (last component 1) and the
    projected center (first M-1 components of z).
    """
    V = np.asarray(simplex_vertices, dtype=float)
    h = np.asarray(heights, dtype=float)
    M = V.shape[0]
    beta = h[:-1] - h[-1]
    A = V[:-1] - V[-1]
    try:
        w0p = np.linalg.solve(A, -beta)
    except np.linalg.LinAlgError as e:
        raise SingularSystem("degenerate simplex in normal solve") from e
    w0 = np.append(w0p, 1.0)
    W = np.hstack([V, np.append(beta, 0.0)[:, None]])  # lifted, normalized
    B = np.zeros((M, M))
    B[:-1, :-1] = A
    B[:-1, -1] = beta
    B[-1, :] = w0
    rhs = np.empty(M)
    rhs[:-1] = 0.5 * (
        np.einsum("ij,ij->i", W[:-1], W[:-1]) - W[-1] @ W[-1]
    )
    rhs[-1] = V[-1] @ w0p
    try:
        z = np.linalg.solve(B, rhs)
    except np.linalg.LinAlgError as e:
        raise SingularSystem("degenerate simplex in center solve") from e
    return {
        "center": z,
        "radius": float(np.linalg.norm(z - W[-1])),
        "normal": w0,
        "projected_center": z[:-1],
    }


def _projected_spheres_batch(V, betas):
    """Batched version of the two-system solve for one simplex.

    V: (M, M-1) flat vertices; betas: (H, M-1).  Returns centers (H, M),
    radii (H,), normals (H, M).
    """
    M = V.shape[0]
    H = betas.shape[0]
    A = V[:-1] - V[-1]
    w0p = np.linalg.solve(A, -betas.T).T  # (H, M-1)
    B = np.zeros((H, M, M))
    B[:, :-1, :-1] = A
    B[:, :-1, -1] = betas
    B[:, -1, :-1] = w0p
    B[:, -1, -1] = 1.0
    rhs = np.empty((H, M))
    flat_sq = np.einsum("ij,ij->i", V[:-1], V[:-1]) - V[-1] @ V[-1]
    rhs[:, :-1] = 0.5 * (flat_sq[None, :] + betas ** 2)
    rhs[:, -1] = w0p @ V[-1]
    z = np.linalg.solve(B, rhs[..., None])[..., 0]
    wM = np.concatenate([np.broadcast_to(V[-1], (H, M - 1)), np.zeros((H, 1))], axis=1)
    radii = np.linalg.norm(z - wM, axis=1)
    w0 = np.concatenate([w0p, np.ones((H, 1))], axis=1)
    return z, radii, w0


def _height_boxes(V, omega, n_random, rng):
    """Extreme corners plus random interiors of the admissible height box."""
    M = V.shape[0]
    lens = np.linalg.norm(V[:-1] - V[-1], axis=1)
    bounds = omega * lens
    corners = np.array(list(itertools.product(*[(-b, b) for b in bounds])))
    rand = rng.uniform(-1.0, 1.0, size=(n_random, M - 1)) * bounds[None, :]
    return np.vstack([corners, rand])


def _sphere_dirs(dim, n, seed=12345):
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        t = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _projection_slack(lattice, omega, n_random, n_dirs, seed):
    """Worst-case (eta - deviation) over representative simplices.

    deviation = max over admissible heights and sampled directions of the
    distance from a projected circumsphere point to the flat circumsphere.
    Positive slack certifies the Lipschitz bound omega.
    """
    from ._geom import circumsphere

    rng = np.random.default_rng(seed)
    dirs = _sphere_dirs(lattice.dimension, n_dirs)
    worst = np.inf
    for rep in lattice.representative_simplices:
        V = rep.astype(float) @ lattice.basis
        c, R = circumsphere(V)
        betas = _height_boxes(V, omega, n_random, rng)
        z, radii, w0 = _projected_spheres_batch(V, betas)
        # orthonormal basis of the hyperplane w0-perp, batched via QR
        H = z.shape[0]
        M = V.shape[0]
        Q = np.zeros((H, M, M))
        Q[:, :, 0] = w0 / np.linalg.norm(w0, axis=1, keepdims=True)
        Q[:, :, 1:] = np.broadcast_to(np.eye(M)[:, : M - 1], (H, M, M - 1))
        basis = np.linalg.qr(Q)[0][:, :, 1:]  # (H, M, M-1)
        pts = z[:, None, :] + radii[:, None, None] * np.einsum(
            "hmk,dk->hdm", basis, dirs
        )
        proj = pts[..., :-1]
        dev = np.abs(np.linalg.norm(proj - c, axis=-1) - R)
        worst = min(worst, float(lattice.empty_ball_margin - dev.max()))
    return worst


def lipschitz_bound_omega(lattice, n_random=1000, n_dirs=100, seed=7):
    """Largest omega (binary search, resolution 1e-4) with all projected
    circumspheres inside the eta-neighbourhood of the flat circumsphere.

    Scale invariance of the construction makes the bound valid for every
    tessellation scale.  Raises NoPositiveOmega when even the smallest
    grid value fails.
    """
    lo = OMEGA_RESOLUTION
    if _projection_slack(lattice, lo, n_random, n_dirs, seed) <= 0:
        raise NoPositiveOmega("projection tolerance fails at omega = 1e-4")
    hi = lo
    while hi < 4.0 and _projection_slack(lattice, hi * 2, n_random, n_dirs, seed) > 0:
        hi *= 2
    hi = min(hi * 2, 8.0)
    while hi - lo > OMEGA_RESOLUTION:
        mid = 0.5 * (lo + hi)
        if _projection_slack(lattice, mid, n_random, n_dirs, seed) > 0:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class LiftedSurface:
    """Convex polyhedral graph of the lift of a tessellation patch.

    facets[i] is the M-vertex simplex of lifted points over projected
    cell cells[i]; normals/offsets describe the supporting hyperplane
    <y|n> <= alpha with unit outward normal.
    """

    window: CapWindow
    tess: object
    sphere_radius: float
    cells: np.ndarray        # (F, M, M-1) projected cells
    cells_int: np.ndarray    # (F, M, M-1) integer lattice coords
    facets: np.ndarray       # (F, M, M)
    normals: np.ndarray      # (F, M)
    offsets: np.ndarray      # (F,)
    convexity_margin: float

    def lift(self, points):
        """Piecewise-affine lift: locate the projected cell, interpolate
        the vertex heights affinely.  Points must lie in a covered cell."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        M = self.facets.shape[1]
        out = np.full((P.shape[0], M), np.nan)
        todo = np.ones(P.shape[0], dtype=bool)
        for cell, facet in zip(self.cells, self.facets):
            if not todo.any():
                break
            idx = np.flatnonzero(todo)
            E = (cell[:-1] - cell[-1]).T
            t = np.linalg.solve(E, (P[idx] - cell[-1]).T).T
            bary0 = 1.0 - t.sum(axis=1)
            inside = (t.min(axis=1) >= -1e-9) & (bary0 >= -1e-9)
            hit = idx[inside]
            if hit.size:
                w = np.column_stack([t[inside], bary0[inside]])
                V = np.vstack([facet[:-1], facet[-1:]])
                out[hit] = w @ V
                todo[hit] = False
        if todo.any():
            raise DomainError("point outside the covered window cells")
        if np.asarray(points).ndim == 1:
            return out[0]
        return out

    def facet_min_norms(self):
        from ._geom import dist_origin_simplices

        return dist_origin_simplices(self.facets)


def build_lifted_surface(window, tess, r, constants=None):
    """Lift every tessellation cell contained in U onto the radius-r sphere.

    Verifies convexity exhaustively: each facet's supporting hyperplane
    must strictly separate all other lifted vertices toward the origin.
    When constants are supplied the Prop-7.2-style shell containment
    (facets miss the ball of radius r - scale^2 * lambda) is also checked.
    """
    if not window.base_radius < r < 1:
        raise DomainError("need R0 < r < 1")
    mu_w = window.window_radius
    cells, cells_int = delaunay_cells_in_region(
        tess, -mu_w * np.ones(window.dimension - 1), mu_w * np.ones(window.dimension - 1)
    )
    vnorms = np.linalg.norm(cells, axis=2)
    keep = np.all(vnorms <= mu_w, axis=1)
    cells = cells[keep]
    cells_int = cells_int[keep]
    if cells.shape[0] == 0:
        raise DomainError("window contains no full tessellation cell")

    # unique lifted vertices
    flat_int = cells_int.reshape(-1, cells_int.shape[2])
    uniq, inverse = np.unique(flat_int, axis=0, return_inverse=True)
    upts = tess.scale * (uniq.astype(float) @ tess.lattice.basis + tess.offset)
    heights = psi_batch(r, upts)
    lifted_unique = np.hstack([upts, heights[:, None]])
    F, M = cells.shape[0], cells.shape[1]
    facets = lifted_unique[inverse].reshape(F, M, M)

    # supporting hyperplanes via the normal system (last component 1)
    A = cells[:, :-1, :] - cells[:, -1:, :]              # (F, M-1, M-1)
    beta = facets[:, :-1, -1] - facets[:, -1:, -1]       # (F, M-1)
    try:
        w0p = np.linalg.solve(A, -beta[..., None])[..., 0]
    except np.linalg.LinAlgError as e:
        raise SingularSystem("degenerate projected cell") from e
    normals = np.concatenate([w0p, np.ones((F, 1))], axis=1)
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    offsets = np.einsum("fd,fd->f", normals, facets[:, -1, :])
    if np.any(offsets <= 0):
        raise ConvexityViolation("support hyperplane through the origin side")

    # exhaustive convexity check against every other lifted vertex,
    # chunked so the (F, K) clearance matrix never fully materializes
    own = inverse.reshape(F, M)
    margin = np.inf
    worst = (0, 0)
    rows = max(1, int(2 ** 24 // max(lifted_unique.shape[0], 1)))
    for f0 in range(0, F, rows):
        f1 = min(f0 + rows, F)
        dots = normals[f0:f1] @ lifted_unique.T
        ar = np.arange(f1 - f0)
        for col in range(M):
            dots[ar, own[f0:f1, col]] = -np.inf
        clear = offsets[f0:f1, None] - dots
        i, v = np.unravel_index(np.argmin(clear), clear.shape)
        if clear[i, v] < margin:
            margin = float(clear[i, v])
            worst = (f0 + int(i), int(v))
    if margin <= 0:
        f, v = worst
        raise ConvexityViolation(
            "lifted vertex %d violates facet %d by %.3e" % (v, f, -margin),
            facet=f, vertex=v, margin=margin,
        )

    surface = LiftedSurface(
        window=window, tess=tess, sphere_radius=float(r),
        cells=cells, cells_int=cells_int, facets=facets,
        normals=normals, offsets=offsets, convexity_margin=margin,
    )
    if constants is not None:
        lam = constants.depth_constant
        floor = r - tess.scale ** 2 * lam - 1e-12
        mn = surface.facet_min_norms()
        if mn.min() < floor:
            raise ConvexityViolation(
                "facet dips below the shell floor: %.12g < %.12g"
                % (mn.min(), floor)
            )
    return surface
