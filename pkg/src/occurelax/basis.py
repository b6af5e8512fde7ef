"""Polynomial test functions pairing with the transport identity.

Entries are monomials phi(x, y) = t(x)^alpha * y^beta in per-axis scaled
coordinates t_j = (2 x_j - a_j - b_j)/(b_j - a_j) (better conditioning at
higher degree).  The affine family keeps |beta| <= 1; the nonlinear family
adds y-degrees 2..d_y and strictly contains the affine one.  Compact entries
multiply by the separable bump  prod_j (x_j - a_j)(b_j - x_j), normalized to
peak 1, which vanishes on the box boundary; they serve the weak-form
constraint families.  All gradients are exact polynomial derivatives.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from numpy.polynomial import Polynomial

from .boxes import Box


@dataclass(frozen=True)
class TestEntry:
    x_alpha: tuple  # per-axis degrees of the scaled monomial
    y_beta: tuple  # per-component y degrees
    bump: bool = False

    @property
    def y_degree(self) -> int:
        return sum(self.y_beta)

    def label(self) -> str:
        a = "".join(str(k) for k in self.x_alpha)
        b = "".join(str(k) for k in self.y_beta)
        return f"x{a}y{b}" + ("c" if self.bump else "")


def _multi_indices(dim: int, max_total: int, min_total: int = 0):
    """Multi-indices graded by total degree, lexicographic within a grade."""
    out = []
    for total in range(min_total, max_total + 1):
        for combo in itertools.product(range(total + 1), repeat=dim):
            if sum(combo) == total:
                out.append(combo)
    return out


class TestBasis:
    """Evaluator for a finite family of polynomial test functions."""

    def __init__(self, omega: Box, m: int, mode: str, d_x: int, d_y: int = 0):
        if mode not in ("affine", "nonlinear"):
            raise ValueError(f"unknown basis mode {mode!r}")
        if d_x < 1:
            raise ValueError("d_x must be >= 1")
        if mode == "nonlinear" and d_y < 2:
            raise ValueError("nonlinear mode needs d_y >= 2")
        self.omega = omega
        self.m = m
        self.mode = mode
        self.d_x = d_x
        self.d_y = d_y if mode == "nonlinear" else min(d_y, 1)

        alphas = _multi_indices(omega.dim, d_x)
        entries = [TestEntry(a, (0,) * m) for a in alphas]
        for l in range(m):
            beta = tuple(1 if k == l else 0 for k in range(m))
            entries.extend(TestEntry(a, beta) for a in alphas)
        if mode == "nonlinear":
            for beta in _multi_indices(m, d_y, min_total=2):
                entries.extend(TestEntry(a, beta) for a in alphas)
        self.entries = tuple(entries)
        self.compact_entries = tuple(TestEntry(a, (0,) * m, bump=True) for a in alphas)

    def affine_subbasis(self) -> tuple:
        return tuple(e for e in self.entries if e.y_degree <= 1)

    @lru_cache(maxsize=None)
    def _axis_poly(self, axis: int, degree: int, bump: bool) -> Polynomial:
        a, b = self.omega.lo[axis], self.omega.hi[axis]
        scaled = Polynomial([-(a + b) / (b - a), 2.0 / (b - a)])
        poly = scaled ** degree
        if bump:
            norm = (2.0 / (b - a)) ** 2
            poly = poly * Polynomial([-a * b * norm, (a + b) * norm, -norm])
        return poly

    def _x_factors(self, entry: TestEntry, X: np.ndarray) -> list:
        return [
            self._axis_poly(j, entry.x_alpha[j], entry.bump)(X[:, j])
            for j in range(self.omega.dim)
        ]

    def x_part(self, entry: TestEntry, X: np.ndarray) -> np.ndarray:
        out = np.ones(X.shape[0])
        for f in self._x_factors(entry, X):
            out = out * f
        return out

    def x_part_grad(self, entry: TestEntry, X: np.ndarray, axis: int) -> np.ndarray:
        out = self._axis_poly(axis, entry.x_alpha[axis], entry.bump).deriv()(X[:, axis])
        for j in range(self.omega.dim):
            if j != axis:
                out = out * self._axis_poly(j, entry.x_alpha[j], entry.bump)(X[:, j])
        return out

    def _y_part(self, entry: TestEntry, Y: np.ndarray) -> np.ndarray:
        out = np.ones(Y.shape[0])
        for l, b in enumerate(entry.y_beta):
            if b:
                out = out * Y[:, l] ** b
        return out

    def phi(self, entry: TestEntry, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return self.x_part(entry, X) * self._y_part(entry, Y)

    def dphi_dx(self, entry: TestEntry, X: np.ndarray, Y: np.ndarray, axis: int) -> np.ndarray:
        return self.x_part_grad(entry, X, axis) * self._y_part(entry, Y)

    def dphi_dy(self, entry: TestEntry, X: np.ndarray, Y: np.ndarray, comp: int) -> np.ndarray:
        b = entry.y_beta[comp]
        if b == 0:
            return np.zeros(X.shape[0])
        out = self.x_part(entry, X) * float(b)
        for l, bl in enumerate(entry.y_beta):
            power = bl - 1 if l == comp else bl
            if power:
                out = out * Y[:, l] ** power
        return out


def build_test_basis(omega: Box, m: int, mode: str, d_x: int, d_y: int = 0) -> TestBasis:
    """Construct the polynomial test family over the given domain box."""
    return TestBasis(omega, m, mode, d_x, d_y)
