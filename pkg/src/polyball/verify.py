"""Named verification suites over built artifacts.

Each suite returns a report dict with one entry per check, carrying the
measured margin so regressions show up as shrinking numbers before they
become failures.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ._geom import circumsphere, sample_simplices
from .errors import ConfigError
from .lattice import Tessellation, delaunay_cells_in_region
from .lift import _projection_slack, build_lifted_surface
from .polytope import skeleton_distance_batch

SUITES = ("delaunay", "lift", "shell", "blocks", "runge")


def _check(name, passed, margin, **extra):
    d = {"name": name, "passed": bool(passed), "margin": float(margin)}
    d.update(extra)
    return d


def _report(suite, checks):
    return {
        "suite": suite,
        "passed": all(c["passed"] for c in checks),
        "checks": checks,
    }


def suite_delaunay(lattice, n_cells=500, seed=5):
    """Brute-force empty-circumsphere oracle over at least n_cells cells.

    Independent of the construction-time genericity certificate: every
    cell's circumsphere is tested against all lattice points in a padded
    box around it.
    """
    d = lattice.dimension
    tess = Tessellation(lattice, 1.0, np.zeros(d))
    half = 2.0
    while True:
        cells, _ = delaunay_cells_in_region(
            tess, -half * np.ones(d), half * np.ones(d))
        if cells.shape[0] >= n_cells:
            break
        half *= 1.4
    rng = np.random.default_rng(seed)
    if cells.shape[0] > n_cells:
        cells = cells[rng.choice(cells.shape[0], n_cells, replace=False)]
    pad = 3.0 * lattice.longest_edge
    n_int = np.ceil((half + pad) / np.abs(np.diag(lattice.basis)).min())
    grid = np.arange(-n_int, n_int + 1)
    mesh = np.stack(np.meshgrid(*[grid] * d, indexing="ij"), axis=-1)
    pts = lattice.points(mesh.reshape(-1, d))
    tree = cKDTree(pts)
    margin = np.inf
    violations = 0
    for cell in cells:
        c, R = circumsphere(cell)
        dist, idx = tree.query(c, k=2 * (d + 2))
        vert = np.min(
            np.linalg.norm(pts[idx][:, None, :] - cell[None], axis=2),
            axis=1,
        ) < 1e-9
        inner = dist[~vert]
        if inner.size:
            gap = float(inner.min() - R)
            margin = min(margin, gap)
            if gap <= 0:
                violations += 1
    checks = [
        _check("empty_circumsphere", violations == 0, margin,
               cells=int(cells.shape[0]), violations=violations),
        _check("certified_eta_positive", lattice.empty_ball_margin > 0,
               lattice.empty_ball_margin),
    ]
    return _report("delaunay", checks)


def suite_lift(lattice, window, r, sigma, n_random=1000, n_dirs=100,
               seed=7):
    """Lifted-cap convexity, facet depth, and projection sampling.

    Convexity and facet depth are the construction's own guarantees,
    checked exhaustively against the built surface.  The projection
    sampling certifies the lattice's own Lipschitz bound; the window
    gradient may exceed it, in which case the exhaustive convexity
    check is what carries the build.
    """
    tess = Tessellation(lattice, sigma, np.zeros(lattice.dimension))
    surface = build_lifted_surface(window, tess, r)
    grad = window.gradient_bound
    lam = (1.0 + grad * grad) * lattice.longest_edge ** 2 / \
        window.base_radius
    depth_clear = float(
        surface.facet_min_norms().min() - (r - sigma * sigma * lam))
    from .lift import lipschitz_bound_omega

    omega = lipschitz_bound_omega(lattice, n_random, n_dirs, seed)
    slack = _projection_slack(lattice, omega, n_random, n_dirs, seed)
    checks = [
        _check("convexity_margin", surface.convexity_margin > 0,
               surface.convexity_margin,
               facets=int(surface.facets.shape[0])),
        _check("facet_depth", depth_clear >= -1e-12, depth_clear),
        _check("projection_within_eta", slack > -1e-9 / sigma, slack,
               omega=float(omega), window_gradient=float(grad)),
    ]
    return _report("lift", checks)


def suite_shell(exh, n_skeleton=1000, seed=9):
    """Re-verify every persisted shell polytope's stored certificates."""
    rng = np.random.default_rng(seed)
    checks = []
    inner = np.inf
    outer = np.inf
    on_bnd = 0.0
    for P in exh.polytopes:
        rho = float(P.meta["rho"])
        r = float(P.meta["r"])
        inner = min(inner, float(P.offsets.min() - rho))
        if P.is_light:
            outer = min(outer, r - float(P.meta["net_support_bound"]))
        else:
            outer = min(
                outer, r - float(np.linalg.norm(P.vertices, axis=1).max()))
        sk = P.skeleton_simplices()
        take = sk[rng.choice(sk.shape[0], min(n_skeleton, sk.shape[0]),
                             replace=False)]
        pts = sample_simplices(take, 1, rng)
        on_bnd = max(on_bnd, float(np.abs(P.support_values(pts)).max()))
    checks.append(_check("inner_clearance", inner >= 1e-10, inner,
                         polytopes=len(exh.polytopes)))
    checks.append(_check("outer_clearance", outer >= 0.0, outer))
    checks.append(_check("skeleton_on_boundary", on_bnd <= 1e-9, on_bnd))
    return _report("shell", checks)


def suite_blocks(exh):
    """Schedule identities and strict nesting of the built sequence."""
    M = exh.constants["M"]
    L = exh.constants["L"]
    lam = exh.constants["lambda"]
    r1 = exh.constants["r1"]
    target = (1.0 - r1) / (M * L * lam)
    # the schedule normalizes the trigamma tail sum exactly; the finite
    # prefix only reaches the target minus its own tail
    from scipy.special import polygamma

    a = exh.constants["a"]
    c = exh.constants["c"]
    full = c * c * float(polygamma(1, a + 1.0))
    sched_err = abs(full - target)
    step_err = 0.0
    for k in range(len(exh.sigmas)):
        step = exh.radii[k] + M * L * exh.sigmas[k] ** 2 * lam
        step_err = max(step_err, abs(step - exh.radii[k + 1]))
    nest = np.inf
    for n in range(1, len(exh.polytopes)):
        prev, cur = exh.polytopes[n - 1], exh.polytopes[n]
        nest = min(nest, float(cur.offsets.min() - prev.max_vertex_norm()))
    thetas = exh.thetas()
    checks = [
        _check("sigma_sum_identity", sched_err <= 1e-12, sched_err),
        _check("radial_recurrence", step_err <= 1e-12, step_err),
        _check("strict_nesting",
               len(exh.polytopes) < 2 or nest >= 1e-10,
               nest if len(exh.polytopes) >= 2 else np.inf,
               polytopes=len(exh.polytopes)),
        _check("theta_positive_decreasing",
               thetas.size == 0 or
               (thetas.min() > 0 and np.all(np.diff(thetas) < 0)),
               float(thetas.min()) if thetas.size else np.inf),
    ]
    return _report("blocks", checks)


def suite_runge(series, n_samples=5000, seed=21):
    """Fresh-sample re-verification of every stored series term.

    Requires a complex build; raise ConfigError otherwise so the CLI can
    map it to a clear precondition failure.
    """
    from .holo import _region_boundary, sample_boundary, to_complex

    if series is None:
        raise ConfigError("runge suite needs a complex build with a series")
    rng = np.random.default_rng(seed)
    checks = []
    for i, term in enumerate(series.terms, 1):
        phi = term.phi
        if phi.degree == 0 and phi.target_level == 0.0:
            checks.append(_check("term_%d_zero" % i, True, np.inf))
            continue
        R = phi.domain_radius
        right = _region_boundary(R, 1.0, +1, n_samples, rng)
        left = _region_boundary(R, 1.0 - phi.margin, -1, n_samples, rng)
        e_r = float(np.abs(phi(right) - phi.target_level).max())
        e_l = float(np.abs(phi(left)).max())
        err = max(e_r, e_l)
        checks.append(_check("term_%d_sup_error" % i,
                             err <= phi.tolerance, phi.tolerance - err,
                             degree=int(phi.degree)))
    # certificate (i) re-check on fresh boundary samples
    for cert, P in zip(series.certificates, series.polytopes):
        n = int(cert["n"])
        if cert.get("min_re") is None:
            continue
        bnd = sample_boundary(P, 2000, rng)
        skd = skeleton_distance_batch(bnd, P)
        outside = bnd[skd > float(cert["theta"])]
        if outside.shape[0] == 0:
            continue
        terms = series.terms[:n]
        from .holo import _eval_terms

        re_f = _eval_terms(terms, to_complex(outside)).real
        gap = float(re_f.min() - (n + 1.0) + 1e-9)
        checks.append(_check("boundary_level_n%d" % n, gap >= 0.0, gap))
    return _report("runge", checks)
