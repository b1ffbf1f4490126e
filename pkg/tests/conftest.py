import numpy as np
import pytest

from polyball.blocks import build_exhaustion, find_skeleton_offsets
from polyball.lattice import build_generic_basis
from polyball.lift import CapWindow

# standard window of the main build: ladder 6.8 grains below the rim
R0 = 0.87
MU_W = 0.31
LADDER_SIGMA = 0.008
LADDER_STEPS = (0.0, 1.2, 4.4, 5.6)


def standard_window(lattice, dimension=3):
    g = LADDER_SIGMA * lattice.longest_edge
    mu0 = MU_W - 6.8 * g
    nu = 1.0 - 0.99 * np.sqrt(R0 ** 2 - MU_W ** 2)
    return CapWindow(
        dimension=dimension,
        window_radius=MU_W,
        shell_half_width=float(nu),
        inner_radii=tuple(mu0 + s * g for s in LADDER_STEPS),
        base_radius=R0,
    )


@pytest.fixture(scope="session")
def lat2():
    return build_generic_basis(2, 0.3, 1)


@pytest.fixture(scope="session")
def lat3():
    return build_generic_basis(3, 0.3, 1)


@pytest.fixture(scope="session")
def fam2(lat2):
    return find_skeleton_offsets(lat2, 0.25, seed=7)


@pytest.fixture(scope="session")
def window3(lat2):
    return standard_window(lat2)


@pytest.fixture(scope="session")
def exh_small(lat2, fam2, window3):
    """Reduced-rotation harness: three scheduled blocks, seven built
    polytopes, enough for nesting, schedule, and path tests."""
    return build_exhaustion(
        lat2, fam2, window3, n_blocks=3,
        max_rotations=2, max_polytopes=7, seed=3,
    )
