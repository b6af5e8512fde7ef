"""Axis-aligned boxes with hashable bounds (tuples, not arrays)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("box bounds have mismatched lengths")
        for a, b in zip(self.lo, self.hi):
            if not (np.isfinite(a) and np.isfinite(b)) or a > b:
                raise ValueError(f"empty or unbounded box interval [{a}, {b}]")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def volume(self) -> float:
        v = 1.0
        for a, b in zip(self.lo, self.hi):
            v *= b - a
        return v

    def as_arrays(self):
        return np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)

    def contains(self, point, tol: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float)
        lo, hi = self.as_arrays()
        return bool(np.all(p >= lo - tol) and np.all(p <= hi + tol))

    def grid(self, res) -> np.ndarray:
        """Vertex grid: ``res`` nodes per axis including endpoints.

        A single-node axis uses the interval midpoint.  Returns the tensor
        product flattened to shape (prod(res), dim) in row-major node order.
        """
        res = _per_axis(res, self.dim)
        axes = []
        for a, b, r in zip(self.lo, self.hi, res):
            if r < 1:
                raise ValueError("grid resolution must be >= 1")
            if r == 1:
                axes.append(np.array([0.5 * (a + b)]))
            else:
                axes.append(np.linspace(a, b, r))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def cell_centers(self, res):
        """Uniform cell-centered partition: (centers, volumes, spacings)."""
        res = _per_axis(res, self.dim)
        axes = []
        spacings = []
        for a, b, r in zip(self.lo, self.hi, res):
            if r < 1:
                raise ValueError("cell resolution must be >= 1")
            h = (b - a) / r
            spacings.append(h)
            axes.append(a + h * (np.arange(r) + 0.5))
        mesh = np.meshgrid(*axes, indexing="ij")
        centers = np.stack([m.reshape(-1) for m in mesh], axis=-1)
        volume = float(np.prod(spacings))
        volumes = np.full(centers.shape[0], volume)
        return centers, volumes, np.asarray(spacings)


def _per_axis(res, dim: int):
    if np.isscalar(res):
        return [int(res)] * dim
    res = [int(r) for r in res]
    if len(res) != dim:
        raise ValueError(f"expected {dim} resolutions, got {len(res)}")
    return res
