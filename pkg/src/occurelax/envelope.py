"""Fiberwise convex envelopes of sampled functions.

A fiber is a finite sample set q_s in R^D (joint (y, z) coordinates) with
values f_s.  The lower convex envelope on conv{q_s} is represented as a max
of supporting affine functionals.  Each functional is obtained by solving

    env(q*) = min  sum_s lambda_s f_s
              s.t. sum_s lambda_s q_s = q*,  sum_s lambda_s = 1,  lambda >= 0,

whose optimal duals (c0, c) solve the supporting-hyperplane problem
max l(q*) s.t. l(q_s) <= f_s, so env(q*) = c0 + c . q*.  Fitting one plane
per sample makes the max-of-affine table interpolate the lower hull exactly
on the sample set.  The same LP doubles as the hull-membership test and as
the mixture recovery used to certify envelope values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lp import REL_EQ, LinearProgram, solve_lp


@dataclass
class FiberEnvelope:
    samples: np.ndarray  # (S, D)
    values: np.ndarray  # (S,)
    functionals: np.ndarray  # (J, D+1); env(q) = max_j fn[j,0] + fn[j,1:] . q
    degenerate: bool  # samples affinely dependent (hull is lower-dimensional)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def value(self, q: np.ndarray):
        """Max-of-affine envelope value; finite everywhere (affine extension
        outside the hull).  Batched when q has a leading axis."""
        q = np.asarray(q, dtype=float)
        vals = self.functionals[:, 0] + q @ self.functionals[:, 1:].T
        return vals.max(axis=-1)

    def subgradient(self, q: np.ndarray) -> np.ndarray:
        """Gradient of an active affine piece at q."""
        q = np.asarray(q, dtype=float)
        j = int(np.argmax(self.functionals[:, 0] + self.functionals[:, 1:] @ q))
        return self.functionals[j, 1:]


def _mixture_lp(samples: np.ndarray, q: np.ndarray, objective: np.ndarray) -> LinearProgram:
    S, D = samples.shape
    A = np.empty((D + 1, S))
    A[0] = 1.0
    A[1:] = samples.T
    b = np.concatenate([[1.0], q])
    return LinearProgram(c=objective, A=A, b=b, rel=np.full(D + 1, REL_EQ, dtype=np.int8))


def compute_envelope(samples: np.ndarray, values: np.ndarray) -> FiberEnvelope:
    """Lower convex hull of the lifted points (q_s, f_s) as a functional table."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    values = np.asarray(values, dtype=float)
    S, D = samples.shape
    if S == 0:
        raise ValueError("fiber has no samples")
    if values.shape != (S,):
        raise ValueError("values/samples shape mismatch")

    center = samples.mean(axis=0)
    spread = samples.max(axis=0) - samples.min(axis=0)
    scale = np.where(spread > 1e-12, spread, 1.0)
    degenerate = np.linalg.matrix_rank((samples - center) / scale, tol=1e-9) < D if S > 1 else D > 0

    sq = (samples - center) / scale
    f_shift = values.min()
    f_scale = max(values.max() - f_shift, 1.0)
    fv = (values - f_shift) / f_scale

    planes = []
    seen = set()
    for i in range(S):
        sol = solve_lp(_mixture_lp(sq, sq[i], fv))
        if sol.status != "optimal" or sol.duals is None:
            continue
        c0s, cs = sol.duals[0], sol.duals[1:]
        # back to original coordinates and value scale
        c = f_scale * cs / scale
        c0 = f_shift + f_scale * c0s - float(c @ center)
        key = tuple(np.round(np.concatenate([[c0], c]), 10))
        if key not in seen:
            seen.add(key)
            planes.append(np.concatenate([[c0], c]))
    if not planes:
        # single sample or all-identical fiber: the envelope is the constant
        planes = [np.concatenate([[float(values.min())], np.zeros(D)])]
    return FiberEnvelope(samples, values, np.asarray(planes), bool(degenerate))


def envelope_value(entry: FiberEnvelope, q: np.ndarray) -> Optional[float]:
    """Envelope at q, or None when q is outside the sample hull.

    Membership is an LP feasibility check: q must be a convex combination of
    the fiber samples (the outside case corresponds to the +inf extension).
    """
    q = np.asarray(q, dtype=float)
    if in_hull(entry.samples, q):
        return float(entry.value(q))
    return None


def in_hull(samples: np.ndarray, q: np.ndarray) -> bool:
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    center = samples.mean(axis=0)
    spread = samples.max(axis=0) - samples.min(axis=0)
    scale = np.where(spread > 1e-12, spread, 1.0)
    sol = solve_lp(_mixture_lp((samples - center) / scale, (np.asarray(q, dtype=float) - center) / scale,
                               np.zeros(samples.shape[0])))
    return sol.status == "optimal"


def recover_mixture(entry: FiberEnvelope, q: np.ndarray):
    """Probability weights on the fiber matching barycenter q with mean value
    equal to the envelope; certifies env(q) numerically.  None outside hull."""
    q = np.asarray(q, dtype=float)
    samples, values = entry.samples, entry.values
    center = samples.mean(axis=0)
    spread = samples.max(axis=0) - samples.min(axis=0)
    scale = np.where(spread > 1e-12, spread, 1.0)
    f_shift = values.min()
    f_scale = max(values.max() - f_shift, 1.0)
    sol = solve_lp(_mixture_lp((samples - center) / scale, (q - center) / scale,
                               (values - f_shift) / f_scale))
    if sol.status != "optimal":
        return None
    return sol.x, f_shift + f_scale * sol.value


def fiber_samples(disc, cell: int):
    """(samples, block splitter) for one cell: joint (y, z-flat) coordinates."""
    sel = disc.bulk_atoms[disc.bulk_atoms[:, 0] == cell]
    y = disc.y_nodes[sel[:, 1]]
    z = disc.z_nodes[sel[:, 2]].reshape(sel.shape[0], -1)
    return np.concatenate([y, z], axis=1), sel


def is_x_independent(problem) -> bool:
    """The fiber data ignores x: one envelope table serves every cell."""
    from .expr import free_blocks

    exprs = (problem.lagrangian,) + problem.equality_constraints + problem.inequality_constraints
    return all("x" not in free_blocks(e) for e in exprs)


def build_envelope_tables(problem, disc, expr, lagrangian_values=None):
    """Per-cell envelope tables of ``expr`` over the filtered fibers.

    Returns a list with one FiberEnvelope per cell; when the fiber data is
    x-independent a single table is shared by every cell.
    """
    from .expr import evaluate

    n_cells = disc.cell_centers.shape[0]
    shared = is_x_independent(problem) and "x" not in _expr_blocks(expr)
    tables = []
    cache = None
    for k in range(n_cells):
        if shared and cache is not None:
            tables.append(cache)
            continue
        samples, sel = fiber_samples(disc, k)
        point = {
            "x": disc.cell_centers[sel[:, 0]],
            "y": disc.y_nodes[sel[:, 1]],
            "z": disc.z_nodes[sel[:, 2]],
        }
        if lagrangian_values is not None:
            vals = lagrangian_values[np.flatnonzero(disc.bulk_atoms[:, 0] == k)]
        else:
            vals = np.broadcast_to(
                np.asarray(evaluate(expr, point), dtype=float), (samples.shape[0],)
            )
        entry = compute_envelope(samples, np.asarray(vals, dtype=float))
        tables.append(entry)
        if shared:
            cache = entry
    return tables


def _expr_blocks(expr):
    from .expr import free_blocks

    return free_blocks(expr)
