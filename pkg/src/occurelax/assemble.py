"""Assembly of the measure relaxation as a finite linear program.

Columns are the atom masses: all bulk atoms of the (filtered) discretization
first, then the boundary atoms, in discretization order.  Rows, in order:

    mass                 sum of bulk masses = |Omega|
    liouville            one row per test entry per domain axis:
                         [dphi/dx_j + dphi/dy . z_col_j] on bulk atoms
                         minus phi * n_j on boundary atoms, rhs 0
    integral             one <=-row per bulk / boundary integral constraint
    support-integralized weak-form families: sum_j dpsi/dx_j * F_j on bulk
                         atoms, one equality row per test function

With this raw-mass convention a function-induced measure carries weight
w_cell (resp. face area) per atom, so its objective value is the midpoint
quadrature of the integrand.  Assembly is deterministic: identical inputs
produce identical arrays and names.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .basis import TestBasis
from .discretize import Discretization, _CHUNK
from .dsl import Problem
from .expr import evaluate
from .lp import REL_EQ, REL_LE, LinearProgram
from .mps import default_row_names


class DimensionMismatch(Exception):
    pass


def _eval_rows(expr, coords: dict, count: int) -> np.ndarray:
    out = np.empty(count)
    for start in range(0, count, _CHUNK):
        stop = min(start + _CHUNK, count)
        chunk = {k: v[start:stop] for k, v in coords.items()}
        out[start:stop] = np.broadcast_to(
            np.asarray(evaluate(expr, chunk), dtype=float), (stop - start,)
        )
    return out


def assemble_relaxation(problem: Problem, disc: Discretization, tb: TestBasis) -> LinearProgram:
    """Build the relaxation LP over the filtered atoms.

    The discretization is expected to be support-filtered already; the basis
    decides whether this is the affine or the nonlinear relaxation.
    """
    if tb.omega != problem.omega or tb.m != problem.m:
        raise DimensionMismatch("test basis was built for a different problem geometry")
    n = problem.n
    nb = disc.n_bulk
    nd = disc.n_boundary
    ncols = nb + nd

    bulk = disc.bulk_coordinates()
    bdry = disc.boundary_coordinates()
    X, Y, Z = bulk["x"], bulk["y"], bulk["z"]
    Xb, Yb = bdry["x"], bdry["y"]
    normals = disc.face_normals[disc.boundary_atoms[:, 0]]
    areas = disc.face_areas[disc.boundary_atoms[:, 0]]

    n_liou = len(tb.entries) * n
    n_integ = len(problem.integral_constraints) + len(problem.boundary_integral)
    weak_entries = {
        "compact": tb.compact_entries,
        "free": tuple(e for e in tb.entries if e.y_degree == 0),
    }
    n_weak = sum(len(weak_entries[f.test_space]) for f in problem.weak_families)
    nrows = 1 + n_liou + n_integ + n_weak

    A = np.zeros((nrows, ncols))
    b = np.zeros(nrows)
    rel = np.full(nrows, REL_EQ, dtype=np.int8)
    tags: list = []

    row = 0
    A[row, :nb] = 1.0
    b[row] = problem.omega.volume()
    tags.append("mass")
    row += 1

    for entry in tb.entries:
        x_part = tb.x_part(entry, X)
        dy_parts = [tb.dphi_dy(entry, X, Y, l) for l in range(problem.m)]
        phi_b = tb.phi(entry, Xb, Yb) if nd else np.zeros(0)
        for j in range(n):
            coeff = tb.dphi_dx(entry, X, Y, j)
            for l in range(problem.m):
                coeff = coeff + dy_parts[l] * Z[:, l, j]
            A[row, :nb] = coeff
            if nd:
                A[row, nb:] = -phi_b * normals[:, j]
            tags.append("liouville")
            row += 1
        del x_part

    for expr in problem.integral_constraints:
        A[row, :nb] = _eval_rows(expr, bulk, nb)
        rel[row] = REL_LE
        tags.append("integral")
        row += 1
    for expr in problem.boundary_integral:
        A[row, nb:] = _eval_rows(expr, bdry, nd)
        rel[row] = REL_LE
        tags.append("integral")
        row += 1

    for fam in problem.weak_families:
        if len(fam.components) != n:
            raise DimensionMismatch("weak family component count != domain dimension")
        F = [_eval_rows(comp, bulk, nb) for comp in fam.components]
        for entry in weak_entries[fam.test_space]:
            coeff = np.zeros(nb)
            for j in range(n):
                coeff += tb.dphi_dx(entry, X, Y, j) * F[j]
            A[row, :nb] = coeff
            tags.append("support-integralized")
            row += 1

    if row != nrows:
        raise DimensionMismatch(f"assembled {row} rows, expected {nrows}")

    c = np.zeros(ncols)
    c[:nb] = _eval_rows(problem.lagrangian, bulk, nb)
    if nd:
        c[nb:] = _eval_rows(problem.boundary_lagrangian, bdry, nd)

    names = default_row_names(tags)
    col_names = [f"X{j + 1:07d}" for j in range(ncols)]
    return LinearProgram(c=c, A=A, b=b, rel=rel, row_tags=tags, row_names=names, col_names=col_names)


def induced_weights(
    disc: Discretization,
    y_of_x,
    dy_of_x,
    u_of_x=None,
    require_exact: bool = False,
) -> np.ndarray:
    """Atom weights of the measure induced by a nodal function.

    Each cell contributes its volume at the atom nearest to
    (x_k, y(x_k), Dy(x_k)[, u(x_k)]); each face contributes its area at the
    nearest boundary atom.  With ``require_exact`` the nearest atom must
    match to 1e-9 (used by quadrature-exactness tests on aligned grids).
    """
    weights = np.zeros(disc.n_bulk + disc.n_boundary)
    coords = disc.bulk_coordinates()
    for k in range(disc.cell_centers.shape[0]):
        sel = np.flatnonzero(disc.bulk_atoms[:, 0] == k)
        if sel.size == 0:
            raise ValueError(f"cell {k} has no atoms")
        x = disc.cell_centers[k]
        target_y = np.asarray(y_of_x(x), dtype=float)
        target_z = np.asarray(dy_of_x(x), dtype=float)
        dist = np.linalg.norm(coords["y"][sel] - target_y, axis=1) ** 2
        dist += np.linalg.norm(
            (coords["z"][sel] - target_z).reshape(sel.size, -1), axis=1
        ) ** 2
        if u_of_x is not None:
            dist += np.linalg.norm(coords["u"][sel] - np.asarray(u_of_x(x)), axis=1) ** 2
        pick = sel[int(np.argmin(dist))]
        if require_exact and dist[int(np.argmin(dist))] > 1e-18:
            raise ValueError(f"cell {k}: induced point is off-grid by {np.sqrt(dist.min()):.2e}")
        weights[pick] += disc.cell_volumes[k]
    bcoords = disc.boundary_coordinates()
    for f in range(disc.face_centers.shape[0]):
        sel = np.flatnonzero(disc.boundary_atoms[:, 0] == f)
        if sel.size == 0:
            continue
        x = disc.face_centers[f]
        target_y = np.asarray(y_of_x(x), dtype=float)
        dist = np.linalg.norm(bcoords["y"][sel] - target_y, axis=1)
        pick = sel[int(np.argmin(dist))]
        if require_exact and dist.min() > 1e-9:
            raise ValueError(f"face {f}: induced trace is off-grid by {dist.min():.2e}")
        weights[disc.n_bulk + pick] += disc.face_areas[f]
    return weights
