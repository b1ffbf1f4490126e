import numpy as np
import pytest

from polyball._geom import circumsphere
from polyball.lattice import (
    Tessellation,
    build_generic_basis,
    delaunay_cells_in_ball,
    delaunay_cells_in_region,
    voronoi_cell_origin,
)


def test_build_deterministic():
    a = build_generic_basis(2, 0.3, 1)
    b = build_generic_basis(2, 0.3, 1)
    assert np.array_equal(a.basis, b.basis)
    assert a.empty_ball_margin == b.empty_ball_margin


def test_margin_positive(lat2, lat3):
    assert lat2.empty_ball_margin > 0
    assert lat3.empty_ball_margin > 0
    assert lat2.empty_ball_margin < lat2.raw_margin


def test_coordinate_roundtrip(lat2):
    ints = np.array([[1, 2], [-3, 5], [0, 0]])
    pts = lat2.points(ints)
    back = lat2.to_lattice_coords(pts)
    assert np.allclose(back, ints, atol=1e-12)


def test_bruteforce_empty_circumsphere(lat2):
    """Independent oracle: no lattice point strictly inside any cell's
    circumsphere, with at least the certified margin to spare."""
    tess = Tessellation(lat2, 1.0, np.zeros(2))
    cells, _ = delaunay_cells_in_region(
        tess, -3.0 * np.ones(2), 3.0 * np.ones(2))
    assert cells.shape[0] >= 50
    grid = np.arange(-8, 9)
    mesh = np.stack(np.meshgrid(grid, grid, indexing="ij"), axis=-1)
    pts = lat2.points(mesh.reshape(-1, 2))
    for cell in cells[:100]:
        c, R = circumsphere(cell)
        d = np.linalg.norm(pts - c, axis=1)
        vert = np.min(
            np.linalg.norm(pts[:, None, :] - cell[None], axis=2), axis=1
        ) < 1e-9
        assert d[~vert].min() - R > lat2.empty_ball_margin


def test_cells_in_ball_subset_of_region(lat2):
    tess = Tessellation(lat2, 1.0, np.zeros(2))
    ball, _ = delaunay_cells_in_ball(tess, np.zeros(2), 2.0)
    region, _ = delaunay_cells_in_region(
        tess, -4.0 * np.ones(2), 4.0 * np.ones(2))
    keys = {tuple(np.sort(c, axis=0).ravel().round(9)) for c in region}
    for c in ball:
        assert tuple(np.sort(c, axis=0).ravel().round(9)) in keys


def test_voronoi_origin_cell(lat2):
    P = voronoi_cell_origin(lat2)
    assert np.all(P.offsets > 0)
    # each facet offset is half the distance to the matching neighbour
    assert P.offsets.min() > 0.2


def test_scaled_offset_tessellation(lat2):
    off = np.array([0.1, -0.2])
    tess = Tessellation(lat2, 0.5, off)
    cells, ints = delaunay_cells_in_region(
        tess, -1.0 * np.ones(2), 1.0 * np.ones(2))
    expect = 0.5 * (ints[0].astype(float) @ lat2.basis + off)
    assert np.allclose(cells[0], expect, atol=1e-12)
