"""Product grids and measure atoms for a problem.

Bulk atoms live on (cell center) x (y node) x (z node) [x (u node)]; boundary
atoms on (face center) x (y node) [x (boundary u node)].  Cells are uniform
and cell-centered so volumes sum to |Omega| exactly; y/z/u grids are vertex
grids including box endpoints.  Support filtering keeps atoms satisfying the
pointwise constraints within tolerance and reports per-constraint kills.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .dsl import Problem
from .expr import evaluate, free_blocks

DEFAULT_ATOM_CAP = 5_000_000
_CHUNK = 262_144


class ResolutionOverflow(Exception):
    """Requested grids exceed the atom cap."""


class EmptySupport(Exception):
    """Some cell lost all its atoms; tolerances too tight or problem infeasible."""


@dataclass
class Discretization:
    problem: Problem
    res_x: tuple
    cell_centers: np.ndarray  # (Nc, n)
    cell_volumes: np.ndarray  # (Nc,)
    spacings: np.ndarray  # (n,)
    face_centers: np.ndarray  # (Nf, n)
    face_areas: np.ndarray  # (Nf,)
    face_normals: np.ndarray  # (Nf, n), unit outward
    face_axis: np.ndarray  # (Nf,) axis of the facet normal
    face_cell: np.ndarray  # (Nf,) index of the adjacent cell
    y_nodes: np.ndarray  # (Ny, m)
    z_nodes: np.ndarray  # (Nz, m, n)
    u_nodes: Optional[np.ndarray]  # (Nu, d) or None
    u_boundary_nodes: Optional[np.ndarray]
    bulk_atoms: np.ndarray  # (Na, 3|4) int columns: cell, y, z[, u]
    boundary_atoms: np.ndarray  # (Nb, 2|3) int columns: face, y[, u]
    kill_counts: Optional[dict] = None

    @property
    def n_bulk(self) -> int:
        return self.bulk_atoms.shape[0]

    @property
    def n_boundary(self) -> int:
        return self.boundary_atoms.shape[0]

    def bulk_coordinates(self, atoms: Optional[np.ndarray] = None) -> dict:
        """Block-value arrays for the given bulk atoms (default: all)."""
        a = self.bulk_atoms if atoms is None else atoms
        point = {
            "x": self.cell_centers[a[:, 0]],
            "y": self.y_nodes[a[:, 1]],
            "z": self.z_nodes[a[:, 2]],
        }
        if self.u_nodes is not None and a.shape[1] > 3:
            point["u"] = self.u_nodes[a[:, 3]]
        return point

    def boundary_coordinates(self, atoms: Optional[np.ndarray] = None) -> dict:
        a = self.boundary_atoms if atoms is None else atoms
        point = {
            "x": self.face_centers[a[:, 0]],
            "y": self.y_nodes[a[:, 1]],
        }
        if self.u_boundary_nodes is not None and a.shape[1] > 2:
            point["u"] = self.u_boundary_nodes[a[:, 2]]
        return point


def _cartesian_indices(counts) -> np.ndarray:
    grids = np.meshgrid(*[np.arange(c) for c in counts], indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=-1).astype(np.int64)


def _boundary_faces(problem: Problem, res_x):
    """All 2n box facets tessellated by the transverse cell grid."""
    n = problem.n
    lo, hi = problem.omega.as_arrays()
    res_x = list(res_x)
    h = (hi - lo) / np.asarray(res_x)
    centers, areas, normals, axes, cells = [], [], [], [], []
    strides = np.ones(n, dtype=np.int64)
    for j in range(n - 2, -1, -1):
        strides[j] = strides[j + 1] * res_x[j + 1]
    for axis in range(n):
        other = [k for k in range(n) if k != axis]
        transverse = [res_x[k] for k in other]
        if transverse:
            idx = _cartesian_indices(transverse)
        else:
            idx = np.zeros((1, 0), dtype=np.int64)
        area = float(np.prod([h[k] for k in other])) if other else 1.0
        for side, (coord, sign, cell_layer) in enumerate(
            ((lo[axis], -1.0, 0), (hi[axis], 1.0, res_x[axis] - 1))
        ):
            for row in idx:
                center = np.empty(n)
                center[axis] = coord
                cell_multi = np.empty(n, dtype=np.int64)
                cell_multi[axis] = cell_layer
                for pos, k in enumerate(other):
                    center[k] = lo[k] + h[k] * (row[pos] + 0.5)
                    cell_multi[k] = row[pos]
                normal = np.zeros(n)
                normal[axis] = sign
                centers.append(center)
                areas.append(area)
                normals.append(normal)
                axes.append(axis)
                cells.append(int(np.dot(cell_multi, strides)))
    return (
        np.asarray(centers),
        np.asarray(areas),
        np.asarray(normals),
        np.asarray(axes, dtype=np.int64),
        np.asarray(cells, dtype=np.int64),
    )


def build_discretization(
    problem: Problem,
    res_x,
    res_y,
    res_z,
    res_u=None,
    res_u_boundary=None,
    y_nodes: Optional[np.ndarray] = None,
    z_nodes: Optional[np.ndarray] = None,
    u_nodes: Optional[np.ndarray] = None,
    atom_cap: Optional[int] = None,
) -> Discretization:
    """Uniform grids for all blocks plus the full (unfiltered) atom lists.

    Explicit ``*_nodes`` arrays override the corresponding uniform grid (used
    e.g. to place y nodes exactly on a constraint set).  Raises
    ``ResolutionOverflow`` when the bulk atom count exceeds the cap
    (default 5e6, env ``OCCURELAX_ATOM_CAP``).
    """
    if atom_cap is None:
        atom_cap = int(os.environ.get("OCCURELAX_ATOM_CAP", DEFAULT_ATOM_CAP))
    n, m, d = problem.n, problem.m, problem.d

    res_x_t = tuple(np.atleast_1d(np.asarray(res_x, dtype=int))) if not np.isscalar(res_x) else (int(res_x),) * n
    if len(res_x_t) != n:
        raise ValueError(f"need {n} x-resolutions, got {len(res_x_t)}")
    centers, volumes, spacings = problem.omega.cell_centers(res_x_t)

    if y_nodes is None:
        y_nodes = problem.y_box.grid(res_y)
    else:
        y_nodes = np.atleast_2d(np.asarray(y_nodes, dtype=float))
    if z_nodes is None:
        z_flat = problem.z_box.grid(res_z)
        z_nodes = z_flat.reshape(-1, m, n)
    else:
        z_nodes = np.asarray(z_nodes, dtype=float).reshape(-1, m, n)

    if d > 0:
        if u_nodes is None:
            if res_u is None:
                raise ValueError("control problem needs res_u or explicit u_nodes")
            u_nodes = problem.u_box.grid(res_u)
        else:
            u_nodes = np.atleast_2d(np.asarray(u_nodes, dtype=float))
    else:
        u_nodes = None
    if problem.d_boundary > 0:
        u_boundary_nodes = problem.u_boundary_box.grid(
            res_u_boundary if res_u_boundary is not None else res_u
        )
    else:
        u_boundary_nodes = None

    counts = [centers.shape[0], y_nodes.shape[0], z_nodes.shape[0]]
    if u_nodes is not None:
        counts.append(u_nodes.shape[0])
    total = int(np.prod([float(c) for c in counts]))
    if total > atom_cap:
        raise ResolutionOverflow(f"{total} atoms exceed the cap of {atom_cap}")
    bulk_atoms = _cartesian_indices(counts)

    f_centers, f_areas, f_normals, f_axes, f_cells = _boundary_faces(problem, res_x_t)
    bcounts = [f_centers.shape[0], y_nodes.shape[0]]
    if u_boundary_nodes is not None:
        bcounts.append(u_boundary_nodes.shape[0])
    boundary_atoms = _cartesian_indices(bcounts)

    return Discretization(
        problem=problem,
        res_x=res_x_t,
        cell_centers=centers,
        cell_volumes=volumes,
        spacings=spacings,
        face_centers=f_centers,
        face_areas=f_areas,
        face_normals=f_normals,
        face_axis=f_axes,
        face_cell=f_cells,
        y_nodes=y_nodes,
        z_nodes=z_nodes,
        u_nodes=u_nodes,
        u_boundary_nodes=u_boundary_nodes,
        bulk_atoms=bulk_atoms,
        boundary_atoms=boundary_atoms,
    )


def _filter_mask(exprs, labels, coords, count, eps_eq, eps_ineq, equality, kills):
    mask = np.ones(count, dtype=bool)
    for label, expr in zip(labels, exprs):
        vals = np.empty(count)
        for start in range(0, count, _CHUNK):
            stop = min(start + _CHUNK, count)
            chunk = {k: v[start:stop] for k, v in coords.items()}
            vals[start:stop] = np.broadcast_to(
                np.asarray(evaluate(expr, chunk), dtype=float), (stop - start,)
            )
        if equality:
            keep = np.abs(vals) <= eps_eq
        else:
            keep = vals <= eps_ineq
        kills[label] = int(np.count_nonzero(mask & ~keep))
        mask &= keep
    return mask


def select_feasible_atoms(
    problem: Problem,
    disc: Discretization,
    eps_eq: float = 1e-9,
    eps_ineq: float = 1e-9,
) -> Discretization:
    """Keep atoms satisfying the pointwise constraints within tolerance.

    Equality constraints use |A_i| <= eps_eq, inequalities B_i <= eps_ineq;
    boundary atoms are filtered by the boundary constraint families.  Raises
    ``EmptySupport`` when a cell loses every atom (the mass/Liouville system
    can no longer put measure there).
    """
    if eps_eq <= 0 or eps_ineq <= 0:
        raise ValueError("tolerances must be positive")
    kills: dict = {}

    coords = disc.bulk_coordinates()
    mask = _filter_mask(
        problem.equality_constraints,
        [f"A[{i}]" for i in range(len(problem.equality_constraints))],
        coords, disc.n_bulk, eps_eq, eps_ineq, True, kills,
    )
    mask &= _filter_mask(
        problem.inequality_constraints,
        [f"B[{i}]" for i in range(len(problem.inequality_constraints))],
        coords, disc.n_bulk, eps_eq, eps_ineq, False, kills,
    )
    bulk = disc.bulk_atoms[mask]

    bcoords = disc.boundary_coordinates()
    bmask = _filter_mask(
        problem.boundary_equality,
        [f"A_boundary[{i}]" for i in range(len(problem.boundary_equality))],
        bcoords, disc.n_boundary, eps_eq, eps_ineq, True, kills,
    )
    bmask &= _filter_mask(
        problem.boundary_inequality,
        [f"B_boundary[{i}]" for i in range(len(problem.boundary_inequality))],
        bcoords, disc.n_boundary, eps_eq, eps_ineq, False, kills,
    )
    boundary = disc.boundary_atoms[bmask]

    n_cells = disc.cell_centers.shape[0]
    covered = np.zeros(n_cells, dtype=bool)
    covered[bulk[:, 0]] = True
    if not covered.all():
        missing = int(np.flatnonzero(~covered)[0])
        raise EmptySupport(
            f"cell {missing} lost all its atoms (of {n_cells} cells); "
            "loosen eps or refine the y/z/u grids"
        )
    kills["empty_faces"] = int(
        disc.face_centers.shape[0] - np.unique(boundary[:, 0]).size
    )
    return replace(disc, bulk_atoms=bulk, boundary_atoms=boundary, kill_counts=kills)
