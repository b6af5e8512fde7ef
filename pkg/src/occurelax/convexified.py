"""Direct minimization of the envelope-convexified problem.

Nodal trajectories on a tensor mesh, forward-difference gradients, objective
sum_k w_k * envL_k(y_k, z_k).  Constraints are handled as in the measure
relaxation's function-space counterpart: per-cell hull membership of
(y_k, z_k) in the fiber sample hull (squared-distance penalty via a small
projection QP), envelope integral constraints (exact penalty), weak-form
families (quadratic penalty on the discrete residuals), and boundary
constraints (hard projection of the touching node onto the admissible
boundary samples).  The envelope objective is convex piecewise-affine, so a
projected subgradient method with a handful of restarts is reliable; the
best-feasible iterate is kept.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .discretize import Discretization
from .dsl import Problem
from .envelope import FiberEnvelope
from .expr import evaluate
from .meshutil import NodalMesh, WeakForms, hull_project


class NoFeasiblePoint(Exception):
    """No restart reached hull membership within tolerance."""


@dataclass
class ConvexifiedSolution:
    value: float
    nodes: np.ndarray  # (n_nodes, m)
    mesh: NodalMesh
    feasible: bool
    hull_violation: float
    integral_violation: float
    weak_violation: float
    best_restart: int
    restart_values: list


class _ConvexifiedObjective:
    def __init__(self, problem, disc, mesh, env_L, env_C):
        self.problem = problem
        self.disc = disc
        self.mesh = mesh
        self.env_L = env_L
        self.env_C = env_C
        self.m = problem.m
        self.n = problem.n

        lo, hi = problem.omega.as_arrays()
        multi = np.stack(
            np.meshgrid(*[np.arange(r) for r in mesh.res], indexing="ij"), axis=-1
        ).reshape(-1, mesh.n)
        self.cell_x = lo + (multi + 0.5) * mesh.h
        self.cell_w = np.full(mesh.n_cells, float(np.prod(mesh.h)))
        # map mesh cells onto discretization cells (identity at equal res)
        d = self.disc
        diffs = self.cell_x[:, None, :] - d.cell_centers[None, :, :]
        self.cell_map = np.argmin((diffs**2).sum(axis=2), axis=1)

        # boundary handling: faces with a constrained sample set pin the node
        self.pins = []  # (node, samples)
        ny = d.y_nodes.shape[0]
        for f in range(d.face_centers.shape[0]):
            sel = d.boundary_atoms[d.boundary_atoms[:, 0] == f]
            if sel.shape[0] == 0 or sel.shape[0] >= ny:
                continue
            samples = d.y_nodes[np.unique(sel[:, 1])]
            cell_multi = np.unravel_index(d.face_cell[f], d.res_x)
            axis = int(d.face_axis[f])
            is_hi = d.face_normals[f, axis] > 0
            node = mesh.face_node(np.asarray(cell_multi), axis, is_hi)
            self.pins.append((node, samples))
        self.boundary_L = None
        if "y" in _free(problem.boundary_lagrangian) or _nonzero(problem.boundary_lagrangian):
            self.boundary_L = (d.face_centers, d.face_areas, [
                mesh.face_node(
                    np.asarray(np.unravel_index(d.face_cell[f], d.res_x)),
                    int(d.face_axis[f]),
                    d.face_normals[f, int(d.face_axis[f])] > 0,
                )
                for f in range(d.face_centers.shape[0])
            ])

        self.weak = WeakForms(problem, self.cell_x)
        self._hull_warm = [None] * mesh.n_cells

    def q_of(self, Y):
        Z = self.mesh.gradients(Y)
        yc = Y[self.mesh.cell_left_node]
        return np.concatenate([yc, Z.reshape(self.mesh.n_cells, -1)], axis=1), Z, yc

    def pin_and_clip(self, Y):
        lo, hi = self.problem.y_box.as_arrays()
        np.clip(Y, lo, hi, out=Y)
        for node, samples in self.pins:
            p, _, _ = hull_project(samples, Y[node])
            Y[node] = p
        return Y

    def assess(self, Y, rho_hull, lam_int, rho_weak):
        """Penalized energy, nodal gradient, and violation statistics."""
        mesh, m, n = self.mesh, self.m, self.n
        q, Z, yc = self.q_of(Y)
        Nc = mesh.n_cells
        g_y = np.zeros((Nc, m))
        g_z = np.zeros((Nc, m, n))
        nodal_extra = np.zeros_like(Y)

        value = 0.0
        for k in range(Nc):
            tab = self.env_L[self.cell_map[k]]
            value += self.cell_w[k] * float(tab.value(q[k]))
            sg = tab.subgradient(q[k]) * self.cell_w[k]
            g_y[k] += sg[:m]
            g_z[k] += sg[m:].reshape(m, n)

        if self.boundary_L is not None:
            from .expr import grad_fd

            centers, areas, nodes = self.boundary_L
            for f, node in enumerate(nodes):
                pt = {"x": centers[f], "y": Y[node]}
                value += areas[f] * float(evaluate(self.problem.boundary_lagrangian, pt))
                nodal_extra[node] += areas[f] * grad_fd(self.problem.boundary_lagrangian, pt, "y")

        total = value
        hull_max = 0.0
        if rho_hull > 0:
            for k in range(Nc):
                samples = self.env_L[self.cell_map[k]].samples
                p, dist2, lam = hull_project(samples, q[k], self._hull_warm[k], iters=40)
                self._hull_warm[k] = lam
                hull_max = max(hull_max, np.sqrt(dist2))
                total += rho_hull * dist2
                diff = 2.0 * rho_hull * (q[k] - p)
                g_y[k] += diff[:m]
                g_z[k] += diff[m:].reshape(m, n)

        int_max = 0.0
        for i, tabs in enumerate(self.env_C):
            g = 0.0
            subs = []
            for k in range(Nc):
                tab = tabs[self.cell_map[k]]
                g += self.cell_w[k] * float(tab.value(q[k]))
                subs.append(tab.subgradient(q[k]))
            int_max = max(int_max, g)
            if g > 0.0:
                total += lam_int * g
                for k in range(Nc):
                    sg = lam_int * self.cell_w[k] * subs[k]
                    g_y[k] += sg[:m]
                    g_z[k] += sg[m:].reshape(m, n)

        weak_max = 0.0
        if self.weak:
            point = {"x": self.cell_x, "y": yc, "z": Z}
            pen, weak_max, wy, wz = self.weak.assess(point, self.cell_w, rho_weak, m, n)
            total += pen
            g_y += wy
            g_z += wz

        nodal = mesh.scatter_cell_grad(g_y, g_z) + nodal_extra
        return total, value, nodal, hull_max, int_max, weak_max


def _free(expr):
    from .expr import free_blocks

    return free_blocks(expr)


def _nonzero(expr) -> bool:
    from .expr import Const

    return expr != Const(0.0)


def solve_convexified(
    problem: Problem,
    disc: Discretization,
    env_lagrangian: list,
    env_integral: Optional[list] = None,
    mesh_res=None,
    restarts: int = 8,
    iters: int = 800,
    seed: int = 0,
    hull_tol: float = 2e-2,
    integral_tol: float = 1e-3,
    weak_tol: float = 2e-2,
) -> ConvexifiedSolution:
    """Minimize the convexified discrete energy over nodal trajectories.

    ``env_lagrangian`` holds one FiberEnvelope per discretization cell (or a
    shared one repeated).  ``env_integral`` is a list per integral constraint.
    Returns the best feasible restart; raises NoFeasiblePoint when hull
    membership cannot be met anywhere.
    """
    mesh = NodalMesh(problem.omega, mesh_res if mesh_res is not None else disc.res_x)
    obj = _ConvexifiedObjective(problem, disc, mesh, env_lagrangian, env_integral or [])
    rng = np.random.default_rng(seed)

    y_lo, y_hi = problem.y_box.as_arrays()
    sample_y = env_lagrangian[0].samples[:, : problem.m]
    center = sample_y.mean(axis=0)
    spread = np.maximum(sample_y.max(axis=0) - sample_y.min(axis=0), 1e-3)

    def initial(r: int) -> np.ndarray:
        if r == 0 and all(s.shape[0] == 1 for _, s in obj.pins) and obj.pins:
            # interpolate pinned boundary values linearly across the mesh
            Y = np.tile(center, (mesh.n_nodes, 1))
            pins = {node: s[0] for node, s in obj.pins}
            if len(pins) >= 1:
                nodes = np.array(list(pins.keys()))
                vals = np.array(list(pins.values()))
                coords = mesh.node_coords
                wsum = np.zeros((mesh.n_nodes, 1))
                acc = np.zeros((mesh.n_nodes, problem.m))
                for node, val in zip(nodes, vals):
                    dist = np.linalg.norm(coords - coords[node], axis=1) + 1e-9
                    w = (1.0 / dist)[:, None]
                    acc += w * val
                    wsum += w
                Y = acc / wsum
            return Y
        if r == 0:
            return np.tile(center, (mesh.n_nodes, 1))
        noise = rng.standard_normal((mesh.n_nodes, problem.m))
        return center + 0.4 * spread * noise

    best = None
    restart_values = []
    for r in range(restarts):
        Y = obj.pin_and_clip(initial(r))
        rho_hull, lam_int, rho_weak = 20.0, 5.0, 50.0
        step0 = None
        best_local = None
        for t in range(1, iters + 1):
            total, value, grad, hv, iv, wv = obj.assess(Y, rho_hull, lam_int, rho_weak)
            feas = hv <= hull_tol and iv <= integral_tol and wv <= weak_tol
            key = (0 if feas else 1, value if feas else total)
            if best_local is None or key < best_local[0]:
                best_local = (key, Y.copy(), value, hv, iv, wv)
            gnorm = float(np.linalg.norm(grad))
            if gnorm < 1e-14:
                break
            if step0 is None:
                step0 = 0.25 * float(np.max(spread))
            Y = obj.pin_and_clip(Y - (step0 / (np.sqrt(t) * gnorm)) * grad)
            if t % 50 == 0:
                if hv > hull_tol:
                    rho_hull = min(rho_hull * 2.0, 1e6)
                if iv > integral_tol:
                    lam_int = min(lam_int * 2.0, 1e6)
                if wv > weak_tol:
                    rho_weak = min(rho_weak * 2.0, 1e7)
        restart_values.append(best_local[2])
        if best is None or best_local[0] < best[0]:
            best = best_local + (r,)

    key, Y, value, hv, iv, wv, r = best
    feasible = key[0] == 0
    if not feasible and hv > hull_tol:
        raise NoFeasiblePoint(f"hull membership violated by {hv:.3g} after {restarts} restarts")
    return ConvexifiedSolution(
        value=value, nodes=Y, mesh=mesh, feasible=feasible,
        hull_violation=hv, integral_violation=iv, weak_violation=wv,
        best_restart=r, restart_values=restart_values,
    )
