import numpy as np
import pytest

from occurelax.discretize import (
    EmptySupport,
    ResolutionOverflow,
    build_discretization,
    select_feasible_atoms,
)
from occurelax.dsl import parse_problem

INTERVAL = """\
occurelax-problem v1

[domain]
n = 1
omega = 0 1

[spaces]
m = 1
y_box = -1 1
z_box = -1 1

[objective]
L = z11^2
"""

SQUARE = """\
occurelax-problem v1

[domain]
n = 2
omega = 0 1 0 1

[spaces]
m = 1
y_box = -1 1
z_box = -1 1 -1 1

[objective]
L = z11^2 + z12^2
"""

FOUR_POINT = """\
occurelax-problem v1

[domain]
n = 1
omega = 0 1

[spaces]
m = 2
y_box = -1 1 -1 1
z_box = -1 1 -1 1

[objective]
L = y1*y2 + z11^2 + z21^2

[constraints]
A = y1^2 - 1
A = y2^2 - 1
"""

FOUR_POINT_Z = """\
occurelax-problem v1

[domain]
n = 1
omega = 0 1

[spaces]
m = 2
y_box = -1 1 -1 1
z_box = -1 1 -1 1

[objective]
L = z11*z21

[constraints]
A = z11^2 - 1
A = z21^2 - 1
"""


def problem_of(text):
    result = parse_problem(text)
    assert result.ok, result.diagnostics
    return result.problem


def test_interval_geometry():
    p = problem_of(INTERVAL)
    d = build_discretization(p, res_x=4, res_y=3, res_z=3)
    assert d.cell_centers.shape == (4, 1)
    assert np.allclose(d.cell_volumes, 0.25)
    assert d.face_centers.shape == (2, 1)
    assert sorted(d.face_normals[:, 0]) == [-1.0, 1.0]
    assert np.allclose(np.sort(d.face_centers[:, 0]), [0.0, 1.0])


def test_unit_square_geometry():
    p = problem_of(SQUARE)
    d = build_discretization(p, res_x=(2, 2), res_y=3, res_z=3)
    assert abs(d.cell_volumes.sum() - 1.0) < 1e-15
    assert d.face_centers.shape[0] == 8
    norms = np.linalg.norm(d.face_normals, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-12)
    assert np.allclose(d.face_areas, 0.5)
    # adjacent cells actually touch their faces
    for i in range(d.face_centers.shape[0]):
        cell = d.cell_centers[d.face_cell[i]]
        axis = d.face_axis[i]
        assert abs(abs(cell[axis] - d.face_centers[i][axis]) - 0.25) < 1e-12


def test_atom_counts():
    p = problem_of(INTERVAL)
    d = build_discretization(p, res_x=4, res_y=3, res_z=5)
    assert d.n_bulk == 4 * 3 * 5
    assert d.n_boundary == 2 * 3


def test_four_point_grid_membership():
    p = problem_of(FOUR_POINT)
    d = build_discretization(p, res_x=4, res_y=(3, 3), res_z=(3, 3))
    corners = {(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)}
    nodes = {tuple(row) for row in d.y_nodes}
    assert corners <= nodes


def test_atom_cap():
    p = problem_of(INTERVAL)
    with pytest.raises(ResolutionOverflow):
        build_discretization(p, res_x=1000, res_y=1000, res_z=1000)


def test_filter_removes_offgrid_equality_nodes():
    p = problem_of(FOUR_POINT)
    d = build_discretization(p, res_x=2, res_y=(3, 3), res_z=(3, 3))
    filtered = select_feasible_atoms(p, d)
    kept_y = np.unique(filtered.bulk_atoms[:, 1])
    assert kept_y.size == 4  # only the corners survive
    assert filtered.kill_counts["A[0]"] > 0
    assert filtered.n_bulk == 2 * 4 * 9


def test_filter_identity_without_constraints():
    p = problem_of(INTERVAL)
    d = build_discretization(p, res_x=4, res_y=3, res_z=3)
    filtered = select_feasible_atoms(p, d)
    assert filtered.n_bulk == d.n_bulk
    assert filtered.n_boundary == d.n_boundary


def test_four_point_z_filter():
    p = problem_of(FOUR_POINT_Z)
    d = build_discretization(p, res_x=3, res_y=(3, 3), res_z=(3, 3))
    filtered = select_feasible_atoms(p, d)
    # exactly 4 z nodes per (cell, y) fiber
    for cell in range(3):
        sel = filtered.bulk_atoms[filtered.bulk_atoms[:, 0] == cell]
        assert np.unique(sel[:, 2]).size == 4


def test_empty_support_raises():
    text = FOUR_POINT.replace("A = y1^2 - 1", "A = y1 - 10")
    p = problem_of(text)
    d = build_discretization(p, res_x=2, res_y=(3, 3), res_z=(3, 3))
    with pytest.raises(EmptySupport):
        select_feasible_atoms(p, d)


def test_boundary_filtering_dirichlet():
    text = INTERVAL.replace("y_box = -1 1", "y_box = 0 1") + "\n[boundary]\nA = y1 - x1\n"
    p = problem_of(text)
    d = build_discretization(p, res_x=4, res_y=5, res_z=3)
    filtered = select_feasible_atoms(p, d)
    # each face keeps exactly the pinned node
    coords = filtered.boundary_coordinates()
    assert filtered.boundary_atoms.shape[0] == 2
    assert np.allclose(coords["y"][:, 0], coords["x"][:, 0])


def test_volume_sum_exact_across_resolutions():
    p = problem_of(SQUARE)
    for res in ((2, 2), (3, 5), (7, 4)):
        d = build_discretization(p, res_x=res, res_y=2, res_z=2)
        assert abs(d.cell_volumes.sum() - 1.0) < 1e-12
