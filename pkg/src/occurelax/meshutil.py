"""Tensor nodal meshes, projections, and shared penalty terms for the
descent solvers."""

from __future__ import annotations

import numpy as np

from .boxes import Box, _per_axis
from .expr import evaluate, grad_fd_batched


class NodalMesh:
    """Nodal values on a tensor mesh with forward-difference gradients.

    Cells are indexed like the cell-centered discretization grid; the nodal
    value attached to a cell is its lower-corner node, and the gradient along
    axis j is (y[node + e_j] - y[node]) / h_j, well defined for every cell.
    """

    def __init__(self, omega: Box, res):
        self.omega = omega
        self.res = _per_axis(res, omega.dim)
        self.n = omega.dim
        lo, hi = omega.as_arrays()
        self.h = (hi - lo) / np.asarray(self.res)
        self.node_counts = [r + 1 for r in self.res]
        self.n_nodes = int(np.prod(self.node_counts))
        self.n_cells = int(np.prod(self.res))

        node_strides = np.ones(self.n, dtype=np.int64)
        for j in range(self.n - 2, -1, -1):
            node_strides[j] = node_strides[j + 1] * self.node_counts[j + 1]
        self.node_strides = node_strides

        cell_multi = np.stack(
            np.meshgrid(*[np.arange(r) for r in self.res], indexing="ij"), axis=-1
        ).reshape(-1, self.n)
        self.cell_left_node = cell_multi @ node_strides
        self.cell_neighbor = np.empty((self.n_cells, self.n), dtype=np.int64)
        for j in range(self.n):
            shifted = cell_multi.copy()
            shifted[:, j] += 1
            self.cell_neighbor[:, j] = shifted @ node_strides

        node_multi = np.stack(
            np.meshgrid(*[np.arange(c) for c in self.node_counts], indexing="ij"), axis=-1
        ).reshape(-1, self.n)
        self.node_coords = lo + node_multi * self.h

    def face_node(self, face_cell_multi: np.ndarray, axis: int, is_hi: bool) -> int:
        multi = np.asarray(face_cell_multi, dtype=np.int64).copy()
        if is_hi:
            multi[axis] += 1
        return int(multi @ self.node_strides)

    def gradients(self, Y: np.ndarray) -> np.ndarray:
        """Forward-difference z per cell, shape (n_cells, m, n)."""
        m = Y.shape[1]
        Z = np.empty((self.n_cells, m, self.n))
        for j in range(self.n):
            Z[:, :, j] = (Y[self.cell_neighbor[:, j]] - Y[self.cell_left_node]) / self.h[j]
        return Z

    def scatter_cell_grad(self, g_y: np.ndarray, g_z: np.ndarray) -> np.ndarray:
        """Accumulate per-cell (dE/dy_cell, dE/dz_cell) into nodal gradients."""
        m = g_y.shape[1]
        out = np.zeros((self.n_nodes, m))
        np.add.at(out, self.cell_left_node, g_y)
        for j in range(self.n):
            gj = g_z[:, :, j] / self.h[j]
            np.add.at(out, self.cell_neighbor[:, j], gj)
            np.add.at(out, self.cell_left_node, -gj)
        return out


class WeakForms:
    """Discrete residuals of the weak-form families on a cell sample.

    Residual per test function psi:  sum_k w_k grad(psi)(x_k) . F(x_k, y_k, z_k);
    assessed as a quadratic penalty with gradients in (y, z) per cell.
    """

    def __init__(self, problem, cell_x: np.ndarray, d_x: int = 2):
        from .basis import build_test_basis

        self.families = []
        if not problem.weak_families:
            return
        tb = build_test_basis(problem.omega, problem.m, "affine", d_x=d_x)
        n = problem.n
        for fam in problem.weak_families:
            entries = tb.compact_entries if fam.test_space == "compact" else tuple(
                e for e in tb.entries if e.y_degree == 0
            )
            grads = [
                np.stack([tb.x_part_grad(e, cell_x, j) for j in range(n)], axis=1)
                for e in entries
            ]
            self.families.append((fam, grads))

    def __bool__(self) -> bool:
        return bool(self.families)

    def assess(self, point: dict, cell_w: np.ndarray, rho: float, m: int, n: int):
        """(penalty value, max |residual|, per-cell g_y, per-cell g_z)."""
        Nc = cell_w.size
        g_y = np.zeros((Nc, m))
        g_z = np.zeros((Nc, m, n))
        total = 0.0
        worst = 0.0
        for fam, psi_grads in self.families:
            F = [
                np.broadcast_to(np.asarray(evaluate(comp, point), dtype=float), (Nc,))
                for comp in fam.components
            ]
            dF_y = [grad_fd_batched(comp, point, "y", Nc) for comp in fam.components]
            dF_z = [grad_fd_batched(comp, point, "z", Nc) for comp in fam.components]
            Fmat = np.stack(F, axis=1)
            for pg in psi_grads:
                r = float(np.sum(cell_w[:, None] * pg * Fmat))
                worst = max(worst, abs(r))
                total += rho * r * r
                coef = 2.0 * rho * r * cell_w
                for j in range(n):
                    g_y += (coef * pg[:, j])[:, None] * dF_y[j]
                    g_z += (coef * pg[:, j])[:, None, None] * dF_z[j]
        return total, worst, g_y, g_z

    def max_residual(self, point: dict, cell_w: np.ndarray) -> float:
        Nc = cell_w.size
        worst = 0.0
        for fam, psi_grads in self.families:
            F = [
                np.broadcast_to(np.asarray(evaluate(comp, point), dtype=float), (Nc,))
                for comp in fam.components
            ]
            Fmat = np.stack(F, axis=1)
            for pg in psi_grads:
                worst = max(worst, abs(float(np.sum(cell_w[:, None] * pg * Fmat))))
        return worst


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.flatnonzero(u * np.arange(1, v.size + 1) > css)[-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def hull_project(samples: np.ndarray, q: np.ndarray, warm=None, iters: int = 80):
    """Nearest point of conv(samples) to q via accelerated projected gradient.

    Returns (point, squared distance, weights); pass the previous weights as
    ``warm`` to converge in a few steps on slowly moving queries.
    """
    S = samples.shape[0]
    if S == 1:
        p = samples[0]
        return p, float(np.sum((q - p) ** 2)), np.ones(1)
    lam = warm if warm is not None and warm.size == S else np.full(S, 1.0 / S)
    G = samples @ samples.T
    gq = samples @ q
    lip = float(np.linalg.norm(G, 2)) + 1e-12
    prev = lam.copy()
    t_prev = 1.0
    for _ in range(iters):
        t = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_prev * t_prev))
        mom = lam + ((t_prev - 1.0) / t) * (lam - prev)
        grad = G @ mom - gq
        prev, t_prev = lam, t
        lam = project_simplex(mom - grad / lip)
    p = lam @ samples
    return p, float(np.sum((q - p) ** 2)), lam
