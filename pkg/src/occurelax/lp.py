"""Dense linear programs and an embedded revised-simplex solver.

Minimization over nonnegative variables (columns may be flagged free, in
which case they are split internally), rows are '=' or '<='.  The solver
keeps an explicit basis inverse with eta updates and refactorizes every 100
pivots; Dantzig pricing switches to Bland's rule after a stall, which
guarantees termination on the heavily degenerate measure LPs.  A brute-force
vertex enumeration oracle double-checks small instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

REL_EQ = 0
REL_LE = 1

_REFACTOR_EVERY = 100
_STALL_LIMIT = 60


class NumericalBreakdown(Exception):
    """Singular basis or unrepairable numerical state; carries diagnostics."""


class SizeExceeded(Exception):
    """Vertex enumeration requested on a problem that is combinatorially too big."""


@dataclass
class LinearProgram:
    c: np.ndarray  # (ncols,)
    A: np.ndarray  # (nrows, ncols)
    b: np.ndarray  # (nrows,)
    rel: np.ndarray  # (nrows,) REL_EQ | REL_LE
    row_tags: list = field(default_factory=list)  # mass | liouville | integral | support-integralized | plumbing
    row_names: list = field(default_factory=list)
    col_names: list = field(default_factory=list)
    free_cols: Optional[np.ndarray] = None  # bool mask; free columns are sign-unrestricted

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float)
        self.rel = np.asarray(self.rel, dtype=np.int8)
        if self.A.shape != (self.b.size, self.c.size):
            raise ValueError(f"shape mismatch: A {self.A.shape}, b {self.b.shape}, c {self.c.shape}")
        if not self.row_tags:
            self.row_tags = ["plumbing"] * self.n_rows
        if not self.row_names:
            self.row_names = [f"ROW{i + 1:07d}" for i in range(self.n_rows)]
        if not self.col_names:
            self.col_names = [f"X{j + 1:07d}" for j in range(self.n_cols)]

    @property
    def n_rows(self) -> int:
        return self.b.size

    @property
    def n_cols(self) -> int:
        return self.c.size


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | iteration-limit
    x: Optional[np.ndarray]
    value: Optional[float]
    duals: Optional[np.ndarray]
    primal_residual: float
    dual_residual: float
    iterations: int


@dataclass
class OracleResult:
    status: str  # optimal | infeasible | unbounded
    value: Optional[float]


def _split_free(lp: LinearProgram):
    """Rewrite free columns as differences of nonnegative pairs."""
    if lp.free_cols is None or not np.any(lp.free_cols):
        return lp.c, lp.A, None
    free = np.flatnonzero(lp.free_cols)
    c = np.concatenate([lp.c, -lp.c[free]])
    A = np.concatenate([lp.A, -lp.A[:, free]], axis=1)
    return c, A, free


def _residuals(lp: LinearProgram, x: np.ndarray):
    r = lp.A @ x - lp.b
    eq = lp.rel == REL_EQ
    primal = 0.0
    if np.any(eq):
        primal = float(np.abs(r[eq]).max())
    if np.any(~eq):
        primal = max(primal, float(np.maximum(r[~eq], 0.0).max()))
    return primal


class _Simplex:
    """Revised simplex on  min c.x  s.t.  A x = b (b >= 0),  x >= 0."""

    def __init__(self, A: np.ndarray, b: np.ndarray, tol: float):
        self.A = A
        self.b = b
        self.tol = tol
        self.nrows, self.ncols = A.shape

    def run(self, c: np.ndarray, basis: np.ndarray, allowed: np.ndarray, max_iters: int):
        """Iterate from the given basis; returns (status, basis, xB, iterations)."""
        A, b, tol = self.A, self.b, self.tol
        basis = basis.copy()
        try:
            binv = np.linalg.inv(A[:, basis])
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown(f"singular starting basis: {exc}") from exc
        xb = binv @ b
        since_refactor = 0
        stall = 0
        bland = False
        best = np.inf
        col_ids = np.arange(self.ncols)

        for it in range(1, max_iters + 1):
            y = c[basis] @ binv
            reduced = c - y @ A
            reduced[basis] = 0.0
            candidates = (reduced < -tol) & allowed
            if not np.any(candidates):
                return "optimal", basis, xb, it
            if bland:
                entering = int(col_ids[candidates][0])
            else:
                cand_idx = col_ids[candidates]
                entering = int(cand_idx[np.argmin(reduced[cand_idx])])

            d = binv @ A[:, entering]
            pos = d > tol
            if not np.any(pos):
                return "unbounded", basis, xb, it
            ratios = np.full(self.nrows, np.inf)
            ratios[pos] = xb[pos] / d[pos]
            rmin = ratios.min()
            tie = np.flatnonzero(ratios <= rmin + tol * (1.0 + abs(rmin)))
            # smallest basis column among ties (Bland-safe leaving rule)
            leaving_row = int(tie[np.argmin(basis[tie])])

            basis[leaving_row] = entering
            step = ratios[leaving_row]
            xb = xb - step * d
            xb[leaving_row] = step
            xb = np.maximum(xb, 0.0)

            since_refactor += 1
            if since_refactor >= _REFACTOR_EVERY:
                try:
                    binv = np.linalg.inv(A[:, basis])
                except np.linalg.LinAlgError as exc:
                    raise NumericalBreakdown(
                        f"singular basis at refactor (pivot {it}, row {leaving_row}, col {entering})"
                    ) from exc
                xb = np.maximum(binv @ b, 0.0)
                since_refactor = 0
            else:
                pivot = d[leaving_row]
                if abs(pivot) < tol:
                    raise NumericalBreakdown(
                        f"vanishing pivot at row {leaving_row}, col {entering}"
                    )
                eta = -d / pivot
                eta[leaving_row] = 1.0 / pivot - 1.0
                binv = binv + np.outer(eta, binv[leaving_row])

            obj = float(c[basis] @ xb)
            if obj < best - tol * (1.0 + abs(best)):
                best = obj
                stall = 0
                bland = False
            else:
                stall += 1
                if stall >= _STALL_LIMIT:
                    bland = True
        return "iteration-limit", basis, xb, max_iters


def _standardize(lp: LinearProgram):
    """Equality standard form with slacks, b >= 0, plus phase-1 artificials."""
    c, A, free = _split_free(lp)
    nrows, ncols = A.shape
    les = np.flatnonzero(lp.rel == REL_LE)
    n_slack = les.size
    A_std = np.zeros((nrows, ncols + n_slack))
    A_std[:, :ncols] = A
    for k, i in enumerate(les):
        A_std[i, ncols + k] = 1.0
    b_std = lp.b.copy()
    negated = b_std < 0
    A_std[negated] *= -1.0
    b_std[negated] *= -1.0
    c_std = np.concatenate([c, np.zeros(n_slack)])
    return A_std, b_std, c_std, negated, free, ncols, les


def solve_lp(lp: LinearProgram, max_iters: Optional[int] = None, tol: float = 1e-9) -> LpSolution:
    """Two-phase revised simplex; residuals are measured, never assumed."""
    if lp.n_cols == 0:
        raise ValueError("LP has no variables")
    if not np.all(np.isfinite(lp.A)) or not np.all(np.isfinite(lp.b)) or not np.all(np.isfinite(lp.c)):
        raise ValueError("LP data must be finite")

    A_std, b_std, c_std, negated, free, ncols_ext, les = _standardize(lp)
    nrows, ncols_std = A_std.shape
    if max_iters is None:
        max_iters = max(2000, 40 * (nrows + ncols_std))

    # initial basis: slacks of non-negated <= rows, artificials elsewhere
    slack_base = ncols_std - les.size
    basis = np.full(nrows, -1, dtype=np.int64)
    for k, i in enumerate(les):
        if not negated[i]:
            basis[i] = slack_base + k

    need_art = np.flatnonzero(basis < 0)
    n_art = need_art.size
    A_work = np.concatenate([A_std, np.zeros((nrows, n_art))], axis=1)
    for k, i in enumerate(need_art):
        A_work[i, ncols_std + k] = 1.0
        basis[i] = ncols_std + k
    simplex = _Simplex(A_work, b_std, tol)
    total_iters = 0

    scale_b = 1.0 + float(np.abs(lp.b).max()) if lp.b.size else 1.0
    if n_art > 0:
        c1 = np.zeros(ncols_std + n_art)
        c1[ncols_std:] = 1.0
        allowed = np.ones(ncols_std + n_art, dtype=bool)
        status, basis, xb, it = simplex.run(c1, basis, allowed, max_iters)
        total_iters += it
        if status == "iteration-limit":
            return LpSolution("iteration-limit", None, None, None, np.inf, np.inf, total_iters)
        feas = float(c1[basis] @ xb)
        if feas > 1e-8 * scale_b:
            return LpSolution("infeasible", None, None, None, feas, np.inf, total_iters)
        # pivot residual artificials out where possible; redundant rows keep
        # their artificial pinned at level zero
        binv = np.linalg.inv(A_work[:, basis])
        in_basis = set(basis.tolist())
        for row in range(nrows):
            if basis[row] < ncols_std:
                continue
            art = basis[row]
            row_coeffs = binv[row] @ A_work[:, :ncols_std]
            for j in np.flatnonzero(np.abs(row_coeffs) > 1e-7):
                if j in in_basis:
                    continue
                basis[row] = j
                try:
                    binv = np.linalg.inv(A_work[:, basis])
                except np.linalg.LinAlgError:
                    basis[row] = art
                    continue
                in_basis.discard(art)
                in_basis.add(int(j))
                break

    c2 = np.concatenate([c_std, np.full(n_art, 0.0)])
    allowed = np.ones(ncols_std + n_art, dtype=bool)
    allowed[ncols_std:] = False  # artificials may never re-enter
    status, basis, xb, it = simplex.run(c2, basis, allowed, max_iters)
    total_iters += it

    if status == "unbounded":
        return LpSolution("unbounded", None, None, None, 0.0, np.inf, total_iters)

    x_ext = np.zeros(ncols_std + n_art)
    x_ext[basis] = xb
    if n_art and float(x_ext[ncols_std:].max(initial=0.0)) > 1e-7 * scale_b:
        return LpSolution("infeasible", None, None, None, float(x_ext[ncols_std:].max()), np.inf, total_iters)
    x = x_ext[: lp.n_cols].copy()
    if free is not None:
        x[free] -= x_ext[lp.n_cols : lp.n_cols + free.size]

    y = c2[basis] @ np.linalg.inv(A_work[:, basis])
    duals = y.copy()
    duals[negated] *= -1.0

    primal_res = _residuals(lp, x)
    reduced = c2[: ncols_std] - y @ A_work[:, :ncols_std]
    dual_res = float(max(0.0, -reduced.min())) if reduced.size else 0.0
    value = float(lp.c @ x)

    if status == "optimal" and primal_res > 1e-7 * scale_b:
        raise NumericalBreakdown(f"optimal claim with primal residual {primal_res:.3e}")
    return LpSolution(status, x, value, duals, primal_res, dual_res, total_iters)


def enumerate_vertices_oracle(lp: LinearProgram, max_bases: int = 500_000) -> OracleResult:
    """Exhaustive basis enumeration for small LPs (independent of solve_lp).

    Walks every basis subset of the slack-augmented standard form, collecting
    feasible vertices and checking each for improving extreme rays.
    """
    from itertools import combinations
    from math import comb

    if lp.n_cols > 12 or lp.n_rows > 12:
        raise SizeExceeded("oracle accepts at most 12 variables and 12 rows")
    A_std, b_std, c_std, negated, free, ncols_ext, les = _standardize(lp)
    nrows, ncols_std = A_std.shape
    if comb(ncols_std, nrows) > max_bases:
        raise SizeExceeded(f"{comb(ncols_std, nrows)} bases exceed the enumeration cap")

    best = np.inf
    feasible = False
    unbounded = False
    for combo in combinations(range(ncols_std), nrows):
        B = A_std[:, combo]
        try:
            xb = np.linalg.solve(B, b_std)
        except np.linalg.LinAlgError:
            continue
        if np.any(xb < -1e-9):
            continue
        feasible = True
        val = float(c_std[list(combo)] @ xb)
        best = min(best, val)
        binv = np.linalg.inv(B)
        y = c_std[list(combo)] @ binv
        reduced = c_std - y @ A_std
        for q in range(ncols_std):
            if q in combo or reduced[q] >= -1e-8:
                continue
            d = binv @ A_std[:, q]
            if np.all(d <= 1e-9):
                unbounded = True
    if not feasible:
        return OracleResult("infeasible", None)
    if unbounded:
        return OracleResult("unbounded", None)
    return OracleResult("optimal", best)
