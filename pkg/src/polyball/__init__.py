"""Nested convex-polytope exhaustions of the unit ball.

Generic lattices and their Delaunay tessellations, sphere-cap lifts,
shell polytopes, block schedules with divergent skeleton chains, path
analysis, and the holomorphic boundary-sum series whose real part grows
across consecutive boundaries.
"""

from .blocks import (
    Exhaustion,
    LargeBlock,
    OffsetFamily,
    SmallBlock,
    build_exhaustion,
    build_large_block,
    build_small_block,
    chain_divergence_lowerbound,
    find_skeleton_offsets,
    rotation_cover,
    sample_window_chains,
    separation_mu,
    sigma_cap,
)
from .errors import PolyballError
from .holo import (
    HoloSeries,
    HoloTerm,
    RungeApproximant,
    build_f_sequence,
    evaluate_f,
    facet_functionals,
    lemma_12_2,
    runge_two_region,
    trace_along_path,
)
from .lattice import (
    GenericLattice,
    Tessellation,
    build_generic_basis,
    delaunay_cells_in_ball,
    delaunay_cells_in_region,
    empty_ball_margin,
    voronoi_cell_origin,
)
from .lift import (
    CapWindow,
    LiftConstants,
    LiftedSurface,
    build_lifted_surface,
    lipschitz_bound_omega,
)
from .paths import (
    Crossing,
    CrossingReport,
    PolylinePath,
    adversarial_short_path,
    analyze_path,
    polygon_oracle_closed_form,
    polygon_pair_oracle_2d,
)
from .polytope import (
    ConvexPolytope,
    ShellPolytopeParams,
    build_shell_light,
    build_shell_polytope,
    facet_margin_eta,
    intersect_halfspaces,
    kappa_margin,
    skeleton_distance,
    window_membership,
)
from .serialize import (
    load_exhaustion,
    save_exhaustion,
    series_from_text,
    series_to_text,
)

__version__ = "0.1.0"
