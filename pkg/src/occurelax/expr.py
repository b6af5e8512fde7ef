"""Expression trees over the variable blocks x, y, z, u.

Expressions are immutable trees evaluated with numpy, so a single call can
evaluate one point or a whole batch (leading axes broadcast).  Blocks:

    x : domain point, shape (n,)
    y : codomain value, shape (m,)
    z : gradient/velocity matrix, shape (m, n)
    u : control, shape (d,)

Division, sqrt and non-integer powers carry domain guards: evaluating where
the guard fails raises ``DomainGuardViolation`` instead of producing NaN.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

BLOCKS = ("x", "y", "z", "u")


class ExpressionError(Exception):
    pass


class MissingBlock(ExpressionError):
    """A block referenced by the expression was not supplied."""


class DomainGuardViolation(ExpressionError):
    """Division by zero, sqrt of a negative, or a bad power base."""


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    block: str
    index: tuple  # (i,) for x/y/u, (i, j) for z


@dataclass(frozen=True)
class Add:
    a: "Expression"
    b: "Expression"


@dataclass(frozen=True)
class Sub:
    a: "Expression"
    b: "Expression"


@dataclass(frozen=True)
class Mul:
    a: "Expression"
    b: "Expression"


@dataclass(frozen=True)
class Div:
    a: "Expression"
    b: "Expression"


@dataclass(frozen=True)
class Neg:
    a: "Expression"


@dataclass(frozen=True)
class Pow:
    base: "Expression"
    exponent: float


@dataclass(frozen=True)
class Abs:
    a: "Expression"


@dataclass(frozen=True)
class Sqrt:
    a: "Expression"


@dataclass(frozen=True)
class Min:
    a: "Expression"
    b: "Expression"


@dataclass(frozen=True)
class Max:
    a: "Expression"
    b: "Expression"


@dataclass(frozen=True)
class Norm:
    parts: tuple  # Euclidean norm of the component expressions


@dataclass(frozen=True)
class Dot:
    left: tuple
    right: tuple


@dataclass(frozen=True)
class BoxIndicator:
    """1 inside the named axis-aligned box (boundary counts as inside), else 0."""

    name: str
    block: str
    lo: tuple
    hi: tuple


Expression = (
    Const | Var | Add | Sub | Mul | Div | Neg | Pow | Abs | Sqrt | Min | Max
    | Norm | Dot | BoxIndicator
)

ZERO = Const(0.0)
ONE = Const(1.0)


def _block_value(point: dict, block: str, index: tuple):
    if block not in point or point[block] is None:
        raise MissingBlock(f"expression references block {block!r} but none was supplied")
    arr = np.asarray(point[block], dtype=float)
    if block == "z":
        i, j = index
        if arr.ndim < 2 or arr.shape[-2] <= i or arr.shape[-1] <= j:
            raise MissingBlock(f"z block too small for index z{i + 1}{j + 1}")
        return arr[..., i, j]
    (i,) = index
    if arr.shape[-1] <= i:
        raise MissingBlock(f"{block} block too small for index {block}{i + 1}")
    return arr[..., i]


def evaluate(expr: Expression, point: dict):
    """Evaluate ``expr`` at ``point`` (dict block name -> ndarray).

    Leading axes of the block arrays broadcast, so batched evaluation is just
    a matter of passing stacked points.  Returns a float for scalar input.
    """
    out = _ev(expr, point)
    arr = np.asarray(out)
    if arr.ndim == 0:
        return float(arr)
    return arr


def _ev(e: Expression, p: dict):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return _block_value(p, e.block, e.index)
    if isinstance(e, Add):
        return _ev(e.a, p) + _ev(e.b, p)
    if isinstance(e, Sub):
        return _ev(e.a, p) - _ev(e.b, p)
    if isinstance(e, Mul):
        return _ev(e.a, p) * _ev(e.b, p)
    if isinstance(e, Div):
        num, den = _ev(e.a, p), _ev(e.b, p)
        if np.any(np.asarray(den) == 0.0):
            raise DomainGuardViolation("division by zero")
        return num / den
    if isinstance(e, Neg):
        return -_ev(e.a, p)
    if isinstance(e, Pow):
        base = np.asarray(_ev(e.base, p))
        k = e.exponent
        if k == int(k):
            k = int(k)
            if k < 0 and np.any(base == 0.0):
                raise DomainGuardViolation("zero base with negative exponent")
            return base ** k
        if np.any(base < 0.0):
            raise DomainGuardViolation("negative base with non-integer exponent")
        return base ** k
    if isinstance(e, Abs):
        return np.abs(_ev(e.a, p))
    if isinstance(e, Sqrt):
        arg = np.asarray(_ev(e.a, p))
        if np.any(arg < 0.0):
            raise DomainGuardViolation("sqrt of a negative value")
        return np.sqrt(arg)
    if isinstance(e, Min):
        return np.minimum(_ev(e.a, p), _ev(e.b, p))
    if isinstance(e, Max):
        return np.maximum(_ev(e.a, p), _ev(e.b, p))
    if isinstance(e, Norm):
        acc = 0.0
        for part in e.parts:
            v = np.asarray(_ev(part, p))
            acc = acc + v * v
        return np.sqrt(acc)
    if isinstance(e, Dot):
        acc = 0.0
        for a, b in zip(e.left, e.right):
            acc = acc + np.asarray(_ev(a, p)) * np.asarray(_ev(b, p))
        return acc
    if isinstance(e, BoxIndicator):
        arr = np.asarray(p.get(e.block))
        if e.block not in p or p[e.block] is None:
            raise MissingBlock(f"indicator references missing block {e.block!r}")
        inside = np.ones(arr.shape[:-1], dtype=bool)
        for j, (lo, hi) in enumerate(zip(e.lo, e.hi)):
            v = arr[..., j]
            inside = inside & (v >= lo) & (v <= hi)
        return inside.astype(float)
    raise TypeError(f"unknown expression node {type(e).__name__}")


def free_blocks(expr: Expression) -> set:
    """Names of blocks the expression reads."""
    out: set = set()
    _collect_blocks(expr, out)
    return out


def _collect_blocks(e: Expression, out: set) -> None:
    if isinstance(e, Var):
        out.add(e.block)
    elif isinstance(e, BoxIndicator):
        out.add(e.block)
    elif isinstance(e, (Const,)):
        pass
    else:
        for child in _children(e):
            _collect_blocks(child, out)


def _children(e: Expression) -> tuple:
    if isinstance(e, (Add, Sub, Mul, Div, Min, Max)):
        return (e.a, e.b)
    if isinstance(e, (Neg, Abs, Sqrt)):
        return (e.a,)
    if isinstance(e, Pow):
        return (e.base,)
    if isinstance(e, Norm):
        return tuple(e.parts)
    if isinstance(e, Dot):
        return tuple(e.left) + tuple(e.right)
    return ()


def max_indices(expr: Expression) -> dict:
    """Largest index used per block, e.g. {'y': (1,), 'z': (0, 2)}."""
    out: dict = {}

    def walk(e: Expression) -> None:
        if isinstance(e, Var):
            cur = out.get(e.block)
            if cur is None:
                out[e.block] = e.index
            else:
                out[e.block] = tuple(max(a, b) for a, b in zip(cur, e.index))
        for child in _children(e):
            walk(child)

    walk(expr)
    return out


def grad_fd(expr: Expression, point: dict, block: str, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient along one block.

    Returns an array shaped like the block value (so an (m, n) array for z).
    All probe evaluations are batched into a single tree walk.
    """
    base = np.asarray(point[block], dtype=float)
    flat = base.reshape(-1)
    k = flat.size
    probes = np.tile(flat, (2 * k, 1))
    for i in range(k):
        probes[2 * i, i] += h
        probes[2 * i + 1, i] -= h
    batched = dict(point)
    batched[block] = probes.reshape((2 * k,) + base.shape)
    for name, val in point.items():
        if name != block and val is not None:
            v = np.asarray(val, dtype=float)
            batched[name] = np.broadcast_to(v, (2 * k,) + v.shape)
    vals = np.broadcast_to(np.asarray(evaluate(expr, batched), dtype=float), (2 * k,))
    g = (vals[0::2] - vals[1::2]) / (2.0 * h)
    return g.reshape(base.shape)


def grad_fd_batched(expr: Expression, point: dict, block: str, count: int, h: float = 1e-6) -> np.ndarray:
    """Central differences along one block for a batch of points.

    ``point[block]`` has shape (count, ...); the result matches it.  Other
    blocks must already be batched (or broadcastable).
    """
    base = np.asarray(point[block], dtype=float)
    flat = base.reshape(count, -1)
    out = np.empty_like(flat)
    for i in range(flat.shape[1]):
        plus, minus = flat.copy(), flat.copy()
        plus[:, i] += h
        minus[:, i] -= h
        pp = dict(point)
        pp[block] = plus.reshape(base.shape)
        fp = np.broadcast_to(np.asarray(evaluate(expr, pp), dtype=float), (count,))
        pp[block] = minus.reshape(base.shape)
        fm = np.broadcast_to(np.asarray(evaluate(expr, pp), dtype=float), (count,))
        out[:, i] = (fp - fm) / (2.0 * h)
    return out.reshape(base.shape)


@dataclass(frozen=True)
class ShapeVerdict:
    """Outcome of numeric convexity/affinity probing.

    kind is one of 'affine', 'convex-likely', 'nonconvex'.  A nonconvex
    verdict carries a witness pair of points whose midpoint value strictly
    exceeds the endpoint average by more than the tolerance.
    """

    kind: str
    witness: Optional[tuple] = None  # (point_p, point_q, violation)


def probe_shape(
    expr: Expression,
    box: dict,
    samples: int = 64,
    seed: int = 0,
    tol: float = 1e-8,
) -> ShapeVerdict:
    """Probe midpoint convexity of ``expr`` over a box in the given blocks.

    ``box`` maps block names to (lo, hi) arrays; blocks not listed must not be
    read by the expression.  Deterministic for a fixed seed.  Verdicts:

    * affine: midpoint identity and axis second differences vanish on all
      sampled triples,
    * convex-likely: midpoint inequality holds on all samples,
    * nonconvex: carries a re-checkable witness of a strict violation.
    """
    if samples < 2:
        raise ValueError("probe_shape needs samples >= 2")
    rng = np.random.default_rng(seed)

    def draw(count: int) -> dict:
        pt = {}
        for blk, (lo, hi) in box.items():
            lo = np.asarray(lo, dtype=float)
            hi = np.asarray(hi, dtype=float)
            pt[blk] = lo + (hi - lo) * rng.random((count,) + lo.shape)
        return pt

    p = draw(samples)
    q = draw(samples)
    mid = {blk: 0.5 * (p[blk] + q[blk]) for blk in p}

    fp = np.atleast_1d(np.asarray(evaluate(expr, p), dtype=float))
    fq = np.atleast_1d(np.asarray(evaluate(expr, q), dtype=float))
    fm = np.atleast_1d(np.asarray(evaluate(expr, mid), dtype=float))
    scale = 1.0 + max(np.abs(fp).max(), np.abs(fq).max(), np.abs(fm).max())
    atol = tol * scale

    viol = fm - 0.5 * (fp + fq)
    worst = int(np.argmax(viol))
    if viol[worst] > atol:
        witness = (
            {blk: p[blk][worst].copy() for blk in p},
            {blk: q[blk][worst].copy() for blk in q},
            float(viol[worst]),
        )
        return ShapeVerdict("nonconvex", witness)

    if np.all(np.abs(viol) <= atol) and _second_differences_vanish(expr, box, rng, atol):
        return ShapeVerdict("affine")
    return ShapeVerdict("convex-likely")


def _second_differences_vanish(expr, box, rng, atol) -> bool:
    # Axis-aligned three-point stencils from a handful of base points.
    for _ in range(4):
        base = {}
        step = {}
        for blk, (lo, hi) in box.items():
            lo = np.asarray(lo, dtype=float)
            hi = np.asarray(hi, dtype=float)
            width = hi - lo
            base[blk] = lo + 0.5 * width * rng.random(lo.shape)
            step[blk] = 0.25 * width
        for blk in box:
            flat = base[blk].reshape(-1)
            for i in range(flat.size):
                pts = {b: np.tile(base[b].reshape(-1), (3, 1)).reshape((3,) + base[b].shape) for b in base}
                s = step[blk].reshape(-1)[i]
                if s == 0.0:
                    continue
                raised = pts[blk].reshape(3, -1)
                raised[1, i] += s
                raised[2, i] += 2.0 * s
                vals = np.asarray(evaluate(expr, pts), dtype=float).reshape(3)
                if abs(vals[2] - 2.0 * vals[1] + vals[0]) > atol:
                    return False
    return True
