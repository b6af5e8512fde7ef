"""Problem file format: parsing, printing, validation.

A problem file is line oriented.  The first non-blank line must be the
version header ``occurelax-problem v1``.  Sections group ``key = value``
lines::

    [domain]      n, omega, optional named boxes (box NAME = lo hi ...)
    [spaces]      m, p, y_box, z_box
    [objective]   L, optional L_boundary
    [constraints] repeated A / B / C lines, weak {compact|free} = c1 ; ... ; cn
    [boundary]    repeated A / B / C lines (expressions in x, y[, u] only)
    [control]     d, u_box, optional d_boundary, u_boundary_box

Expressions use infix syntax with identifiers ``x1..xn``, ``y1..ym``,
``z11..zmn`` (row i = component, column j = domain axis), ``u1..ud``,
functions ``abs, sqrt, min, max, norm, dot`` and named box indicators
``chi_NAME``.  Exponents are numeric literals.  ``#`` starts a comment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .boxes import Box
from .expr import (
    Abs,
    Add,
    BoxIndicator,
    Const,
    Div,
    Dot,
    Expression,
    Max,
    Min,
    Mul,
    Neg,
    Norm,
    Pow,
    Sqrt,
    Sub,
    Var,
    free_blocks,
    probe_shape,
)

VERSION_HEADER = "occurelax-problem v1"


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    line: int  # 1-based
    col_start: int  # 0-based, inclusive
    col_end: int  # 0-based, exclusive
    message: str

    def __str__(self):
        return f"{self.severity}:{self.line}:{self.col_start + 1}: {self.message}"


@dataclass(frozen=True)
class WeakFamily:
    """Weak-form PDE constraint family.

    Encodes the index family of rows  sum_j d(test)/dx_j * components[j]
    integrated against the bulk measure, one row per test function.  The
    test space is 'compact' (vanishing on the boundary) or 'free'.
    """

    components: tuple  # n expressions over (x, y, z)
    test_space: str  # "compact" | "free"


@dataclass(frozen=True)
class Problem:
    n: int
    m: int
    d: int  # control dimension, 0 for plain variational problems
    d_boundary: int
    p: float  # exponent, math.inf allowed
    omega: Box
    y_box: Box
    z_box: Box  # flattened row-major: z11, z12, ..., zmn
    u_box: Optional[Box]
    u_boundary_box: Optional[Box]
    named_boxes: tuple  # sorted tuple of (name, Box)
    lagrangian: Expression
    boundary_lagrangian: Expression
    equality_constraints: tuple
    inequality_constraints: tuple
    integral_constraints: tuple
    boundary_equality: tuple
    boundary_inequality: tuple
    boundary_integral: tuple
    weak_families: tuple

    @property
    def kind(self) -> str:
        return "OC" if self.d > 0 else "CoV"

    def z_box_matrix(self):
        """Per-entry z bounds reshaped to (m, n)."""
        lo, hi = self.z_box.as_arrays()
        return lo.reshape(self.m, self.n), hi.reshape(self.m, self.n)


@dataclass
class ParseResult:
    problem: Optional[Problem]
    diagnostics: list

    @property
    def ok(self) -> bool:
        return self.problem is not None

    def errors(self):
        return [d for d in self.diagnostics if d.severity == "error"]


# ---------------------------------------------------------------------------
# expression tokenizer / parser

_OPS = set("+-*/^(),;")
_FUNCTIONS = ("abs", "sqrt", "min", "max", "norm", "dot")


@dataclass
class _Token:
    kind: str  # "num" | "ident" | op character | "end"
    text: str
    col: int


class _ExprError(Exception):
    def __init__(self, message: str, col: int, width: int = 1):
        super().__init__(message)
        self.col = col
        self.width = width


def _tokenize(text: str, offset: int):
    tokens = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in _OPS:
            tokens.append(_Token(c, c, offset + i))
            i += 1
            continue
        if c.isdigit() or c == ".":
            j = i
            seen_e = False
            while j < len(text):
                ch = text[j]
                if ch.isdigit() or ch == ".":
                    j += 1
                elif ch in "eE" and not seen_e and j + 1 < len(text) and (
                    text[j + 1].isdigit() or text[j + 1] in "+-"
                ):
                    seen_e = True
                    j += 2 if text[j + 1] in "+-" else 1
                else:
                    break
            tokens.append(_Token("num", text[i:j], offset + i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("ident", text[i:j], offset + i))
            i = j
            continue
        raise _ExprError(f"unexpected character {c!r}", offset + i)
    tokens.append(_Token("end", "", offset + len(text)))
    return tokens


class _ExprParser:
    """Recursive-descent parser for one expression string."""

    def __init__(self, text: str, offset: int, dims: dict, boxes: dict, blocks: tuple):
        self.tokens = _tokenize(text, offset)
        self.pos = 0
        self.dims = dims  # {"x": n, "y": m, "z": (m, n), "u": d}
        self.boxes = boxes
        self.blocks = blocks  # allowed block names in this context

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def take(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.take()
        if tok.kind != kind:
            raise _ExprError(f"expected {kind!r}, found {tok.text or 'end of input'!r}", tok.col)
        return tok

    def parse(self) -> Expression:
        e = self.parse_sum()
        tok = self.peek()
        if tok.kind != "end":
            raise _ExprError(f"unexpected trailing token {tok.text!r}", tok.col)
        return e

    def parse_sum(self) -> Expression:
        e = self.parse_term()
        while self.peek().kind in ("+", "-"):
            op = self.take().kind
            rhs = self.parse_term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def parse_term(self) -> Expression:
        e = self.parse_unary()
        while self.peek().kind in ("*", "/"):
            op = self.take().kind
            rhs = self.parse_unary()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def parse_unary(self) -> Expression:
        if self.peek().kind == "-":
            self.take()
            return Neg(self.parse_unary())
        if self.peek().kind == "+":
            self.take()
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self) -> Expression:
        base = self.parse_primary()
        if self.peek().kind == "^":
            self.take()
            sign = 1.0
            if self.peek().kind == "-":
                self.take()
                sign = -1.0
            tok = self.expect("num")
            return Pow(base, sign * float(tok.text))
        return base

    def parse_primary(self) -> Expression:
        tok = self.take()
        if tok.kind == "num":
            return Const(float(tok.text))
        if tok.kind == "(":
            e = self.parse_sum()
            self.expect(")")
            return e
        if tok.kind == "ident":
            if self.peek().kind == "(" and tok.text in _FUNCTIONS:
                return self.parse_call(tok)
            return self.parse_symbol(tok)
        raise _ExprError(f"expected a value, found {tok.text or 'end of input'!r}", tok.col)

    def parse_call(self, name: _Token) -> Expression:
        self.expect("(")
        args = [self.parse_sum()]
        while self.peek().kind == ",":
            self.take()
            args.append(self.parse_sum())
        self.expect(")")
        fn = name.text
        if fn in ("abs", "sqrt"):
            if len(args) != 1:
                raise _ExprError(f"{fn} takes one argument", name.col, len(fn))
            return Abs(args[0]) if fn == "abs" else Sqrt(args[0])
        if fn in ("min", "max"):
            if len(args) != 2:
                raise _ExprError(f"{fn} takes two arguments", name.col, len(fn))
            return Min(*args) if fn == "min" else Max(*args)
        if fn == "norm":
            return Norm(tuple(args))
        if fn == "dot":
            if len(args) % 2 != 0 or not args:
                raise _ExprError("dot takes an even number of arguments (first half . second half)", name.col, 3)
            k = len(args) // 2
            return Dot(tuple(args[:k]), tuple(args[k:]))
        raise _ExprError(f"unknown function {fn!r}", name.col, len(fn))

    def parse_symbol(self, tok: _Token) -> Expression:
        text = tok.text
        if text.startswith("chi_"):
            name = text[4:]
            if name not in self.boxes:
                raise _ExprError(f"unknown box {name!r} in indicator", tok.col, len(text))
            box = self.boxes[name]
            if box.dim != self.dims["x"]:
                raise _ExprError(f"box {name!r} has dimension {box.dim}, domain has {self.dims['x']}", tok.col, len(text))
            return BoxIndicator(name, "x", box.lo, box.hi)
        block = text[0]
        digits = text[1:]
        if block in ("x", "y", "z", "u") and digits.isdigit():
            if block not in self.blocks:
                raise _ExprError(f"variable {text!r} is not allowed in this context", tok.col, len(text))
            if block == "z":
                if len(digits) != 2:
                    raise _ExprError(f"z variables use two single-digit indices, e.g. z11; got {text!r}", tok.col, len(text))
                i, j = int(digits[0]), int(digits[1])
                mm, nn = self.dims["z"]
                if not (1 <= i <= mm and 1 <= j <= nn):
                    raise _ExprError(f"{text!r} is outside the declared z block ({mm}x{nn})", tok.col, len(text))
                return Var("z", (i - 1, j - 1))
            i = int(digits)
            dim = self.dims[block]
            if not 1 <= i <= dim:
                raise _ExprError(f"{text!r} is outside the declared {block} block (size {dim})", tok.col, len(text))
            return Var(block, (i - 1,))
        raise _ExprError(f"unknown identifier {text!r}", tok.col, len(text))


def parse_expression(text: str, dims: dict, boxes: dict, blocks: tuple, offset: int = 0) -> Expression:
    """Parse one expression; raises ``_ExprError`` with a column position."""
    return _ExprParser(text, offset, dims, boxes, blocks).parse()


# ---------------------------------------------------------------------------
# expression printer

def format_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


def format_expression(e: Expression) -> str:
    return _fmt(e, 0)


_PREC_SUM, _PREC_TERM, _PREC_UNARY, _PREC_POW = 1, 2, 3, 4


def _fmt(e: Expression, parent: int) -> str:
    if isinstance(e, Const):
        s = format_number(e.value)
        return f"({s})" if e.value < 0 and parent >= _PREC_TERM else s
    if isinstance(e, Var):
        if e.block == "z":
            return f"z{e.index[0] + 1}{e.index[1] + 1}"
        return f"{e.block}{e.index[0] + 1}"
    if isinstance(e, BoxIndicator):
        return f"chi_{e.name}"
    if isinstance(e, Add):
        s = f"{_fmt(e.a, _PREC_SUM)} + {_fmt(e.b, _PREC_SUM)}"
        return f"({s})" if parent > _PREC_SUM else s
    if isinstance(e, Sub):
        s = f"{_fmt(e.a, _PREC_SUM)} - {_fmt(e.b, _PREC_SUM + 1)}"
        return f"({s})" if parent > _PREC_SUM else s
    if isinstance(e, Mul):
        s = f"{_fmt(e.a, _PREC_TERM)}*{_fmt(e.b, _PREC_TERM)}"
        return f"({s})" if parent > _PREC_TERM else s
    if isinstance(e, Div):
        s = f"{_fmt(e.a, _PREC_TERM)}/{_fmt(e.b, _PREC_TERM + 1)}"
        return f"({s})" if parent > _PREC_TERM else s
    if isinstance(e, Neg):
        s = f"-{_fmt(e.a, _PREC_UNARY)}"
        return f"({s})" if parent > _PREC_UNARY else s
    if isinstance(e, Pow):
        exp = format_number(e.exponent)
        if e.exponent < 0:
            exp = f"-{format_number(-e.exponent)}"
        s = f"{_fmt(e.base, _PREC_POW + 1)}^{exp}"
        return f"({s})" if parent > _PREC_POW else s
    if isinstance(e, Abs):
        return f"abs({_fmt(e.a, 0)})"
    if isinstance(e, Sqrt):
        return f"sqrt({_fmt(e.a, 0)})"
    if isinstance(e, Min):
        return f"min({_fmt(e.a, 0)}, {_fmt(e.b, 0)})"
    if isinstance(e, Max):
        return f"max({_fmt(e.a, 0)}, {_fmt(e.b, 0)})"
    if isinstance(e, Norm):
        return "norm(" + ", ".join(_fmt(x, 0) for x in e.parts) + ")"
    if isinstance(e, Dot):
        return "dot(" + ", ".join(_fmt(x, 0) for x in e.left + e.right) + ")"
    raise TypeError(f"cannot print node {type(e).__name__}")


# ---------------------------------------------------------------------------
# problem file parser

_SECTIONS = ("domain", "spaces", "objective", "constraints", "boundary", "control")


class _FileParser:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.diagnostics: list = []

    def error(self, line: int, col: int, width: int, msg: str) -> None:
        self.diagnostics.append(Diagnostic("error", line, col, col + max(1, width), msg))

    def run(self) -> ParseResult:
        entries = self.scan_lines()
        if self.diagnostics:
            return ParseResult(None, self.diagnostics)
        problem = self.build(entries)
        if self.errors():
            return ParseResult(None, self.diagnostics)
        return ParseResult(problem, self.diagnostics)

    def errors(self):
        return [d for d in self.diagnostics if d.severity == "error"]

    def scan_lines(self):
        """First pass: version header, sections, raw key/value entries."""
        entries = []  # (section, key, value, line, value_col)
        section = None
        saw_header = False
        for lineno, raw in enumerate(self.lines, start=1):
            code = raw.split("#", 1)[0].rstrip()
            if not code.strip():
                continue
            stripped = code.strip()
            indent = len(code) - len(code.lstrip())
            if not saw_header:
                if stripped != VERSION_HEADER:
                    self.error(lineno, indent, len(stripped),
                               f"expected version header {VERSION_HEADER!r}")
                saw_header = True
                continue
            if stripped.startswith("["):
                name = stripped.strip("[]").strip()
                if not stripped.endswith("]") or name not in _SECTIONS:
                    self.error(lineno, indent, len(stripped), f"unknown section {stripped!r}")
                    section = None
                else:
                    section = name
                continue
            if section is None:
                self.error(lineno, indent, len(stripped), "content outside of any section")
                continue
            if "=" not in code:
                self.error(lineno, indent, len(stripped), "expected 'key = value'")
                continue
            key, value = code.split("=", 1)
            value_col = len(key) + 1 + (len(value) - len(value.lstrip()))
            entries.append((section, key.strip(), value.strip(), lineno, value_col))
        if not saw_header and not self.diagnostics:
            self.error(1, 0, 1, f"missing version header {VERSION_HEADER!r}")
        return entries

    def take_scalar(self, entries, section, key, convert, required=False, default=None):
        hits = [e for e in entries if e[0] == section and e[1] == key]
        if not hits:
            if required:
                self.error(1, 0, 1, f"missing required key {key!r} in section [{section}]")
            return default
        if len(hits) > 1:
            _, _, _, lineno, col = hits[1]
            self.error(lineno, col, 1, f"duplicate key {key!r} in section [{section}]")
        _, _, value, lineno, col = hits[0]
        try:
            return convert(value)
        except ValueError as exc:
            self.error(lineno, col, len(value), str(exc))
            return default

    def parse_box(self, value: str, expected_dim: int, lineno: int, col: int) -> Optional[Box]:
        parts = value.split()
        try:
            nums = [float(t) for t in parts]
        except ValueError:
            self.error(lineno, col, len(value), f"box bounds must be numbers: {value!r}")
            return None
        if len(nums) != 2 * expected_dim:
            self.error(lineno, col, len(value),
                       f"expected {2 * expected_dim} numbers (lo hi per axis), got {len(nums)}")
            return None
        lo = tuple(nums[0::2])
        hi = tuple(nums[1::2])
        try:
            return Box(lo, hi)
        except ValueError as exc:
            self.error(lineno, col, len(value), str(exc))
            return None

    def parse_expr_entry(self, value, lineno, col, dims, boxes, blocks):
        try:
            return parse_expression(value, dims, boxes, blocks, offset=col)
        except _ExprError as exc:
            self.error(lineno, exc.col, exc.width, str(exc))
            return None

    def build(self, entries) -> Optional[Problem]:
        def to_int(v):
            if not v.lstrip("-").isdigit():
                raise ValueError(f"expected an integer, got {v!r}")
            return int(v)

        def to_p(v):
            if v in ("inf", "infinity"):
                return math.inf
            if v.isdigit() and int(v) >= 1:
                return float(int(v))
            raise ValueError(f"p must be a positive integer or 'inf', got {v!r}")

        n = self.take_scalar(entries, "domain", "n", to_int, required=True)
        m = self.take_scalar(entries, "spaces", "m", to_int, required=True)
        d = self.take_scalar(entries, "control", "d", to_int, default=0)
        d_boundary = self.take_scalar(entries, "control", "d_boundary", to_int, default=0)
        p = self.take_scalar(entries, "spaces", "p", to_p, default=math.inf)
        if self.errors():
            return None
        for name, val in (("n", n), ("m", m)):
            if val is not None and val < 1:
                self.error(1, 0, 1, f"{name} must be >= 1")
        if d < 0 or d_boundary < 0:
            self.error(1, 0, 1, "control dimensions must be >= 0")
        if self.errors():
            return None

        boxes_named: dict = {}
        omega = y_box = z_box = u_box = u_boundary_box = None
        for section, key, value, lineno, col in entries:
            if section == "domain" and key == "omega":
                omega = self.parse_box(value, n, lineno, col)
            elif section == "domain" and key.startswith("box "):
                name = key[4:].strip()
                if not name.isidentifier():
                    self.error(lineno, 0, len(key), f"bad box name {name!r}")
                else:
                    boxes_named[name] = self.parse_box(value, n, lineno, col)
            elif section == "spaces" and key == "y_box":
                y_box = self.parse_box(value, m, lineno, col)
            elif section == "spaces" and key == "z_box":
                z_box = self.parse_box(value, m * n, lineno, col)
            elif section == "control" and key == "u_box":
                u_box = self.parse_box(value, d, lineno, col)
            elif section == "control" and key == "u_boundary_box":
                u_boundary_box = self.parse_box(value, d_boundary, lineno, col)
            elif section in ("domain", "spaces", "control") and key not in (
                "n", "m", "p", "d", "d_boundary",
            ):
                self.error(lineno, 0, len(key), f"unknown key {key!r} in section [{section}]")

        if omega is None:
            self.error(1, 0, 1, "missing required key 'omega' in section [domain]")
        if y_box is None:
            self.error(1, 0, 1, "missing required key 'y_box' in section [spaces]")
        if z_box is None:
            self.error(1, 0, 1, "missing required key 'z_box' in section [spaces]")
        if d > 0 and u_box is None:
            self.error(1, 0, 1, "missing required key 'u_box' in section [control]")
        if d_boundary > 0 and u_boundary_box is None:
            self.error(1, 0, 1, "missing 'u_boundary_box' for d_boundary > 0")
        if self.errors():
            return None

        dims = {"x": n, "y": m, "z": (m, n), "u": d}
        bdry_dims = {"x": n, "y": m, "z": (m, n), "u": d_boundary}
        bulk_blocks = ("x", "y", "z") + (("u",) if d > 0 else ())
        bdry_blocks = ("x", "y") + (("u",) if d_boundary > 0 else ())
        boxes_ok = {k: v for k, v in boxes_named.items() if v is not None}

        lagrangian = None
        boundary_lagrangian = Const(0.0)
        eq, ineq, integ = [], [], []
        bdry_eq, bdry_ineq, bdry_integ = [], [], []
        weak = []

        for section, key, value, lineno, col in entries:
            if section == "objective":
                if key == "L":
                    lagrangian = self.parse_expr_entry(value, lineno, col, dims, boxes_ok, bulk_blocks)
                elif key == "L_boundary":
                    e = self.parse_expr_entry(value, lineno, col, bdry_dims, boxes_ok, bdry_blocks)
                    if e is not None:
                        boundary_lagrangian = e
                else:
                    self.error(lineno, 0, len(key), f"unknown key {key!r} in section [objective]")
            elif section == "constraints":
                if key in ("A", "B", "C"):
                    e = self.parse_expr_entry(value, lineno, col, dims, boxes_ok, bulk_blocks)
                    if e is not None:
                        {"A": eq, "B": ineq, "C": integ}[key].append(e)
                elif key.startswith("weak"):
                    parts = key.split()
                    space = parts[1] if len(parts) == 2 else ""
                    if space not in ("compact", "free"):
                        self.error(lineno, 0, len(key), "weak family needs a test space: 'weak compact' or 'weak free'")
                        continue
                    comps = []
                    chunk_col = col
                    ok = True
                    for chunk in value.split(";"):
                        e = self.parse_expr_entry(chunk, lineno, chunk_col, dims, boxes_ok, ("x", "y", "z"))
                        chunk_col += len(chunk) + 1
                        if e is None:
                            ok = False
                        else:
                            comps.append(e)
                    if ok and len(comps) != n:
                        self.error(lineno, col, len(value),
                                   f"weak family needs {n} ';'-separated components, got {len(comps)}")
                    elif ok:
                        weak.append(WeakFamily(tuple(comps), space))
                else:
                    self.error(lineno, 0, len(key), f"unknown key {key!r} in section [constraints]")
            elif section == "boundary":
                if key in ("A", "B", "C"):
                    e = self.parse_expr_entry(value, lineno, col, bdry_dims, boxes_ok, bdry_blocks)
                    if e is not None:
                        {"A": bdry_eq, "B": bdry_ineq, "C": bdry_integ}[key].append(e)
                else:
                    self.error(lineno, 0, len(key), f"unknown key {key!r} in section [boundary]")

        if lagrangian is None:
            self.error(1, 0, 1, "missing required key 'L' in section [objective]")
        if self.errors():
            return None

        return Problem(
            n=n, m=m, d=d, d_boundary=d_boundary, p=p,
            omega=omega, y_box=y_box, z_box=z_box,
            u_box=u_box, u_boundary_box=u_boundary_box,
            named_boxes=tuple(sorted(boxes_ok.items())),
            lagrangian=lagrangian,
            boundary_lagrangian=boundary_lagrangian,
            equality_constraints=tuple(eq),
            inequality_constraints=tuple(ineq),
            integral_constraints=tuple(integ),
            boundary_equality=tuple(bdry_eq),
            boundary_inequality=tuple(bdry_ineq),
            boundary_integral=tuple(bdry_integ),
            weak_families=tuple(weak),
        )


def parse_problem(text: str) -> ParseResult:
    """Parse a problem file; returns a Problem or error diagnostics."""
    return _FileParser(text).run()


def print_problem(p: Problem) -> str:
    """Canonical text form; parsing it back yields an identical Problem."""
    out = [VERSION_HEADER, ""]

    def box_line(box: Box) -> str:
        return " ".join(f"{format_number(a)} {format_number(b)}" for a, b in zip(box.lo, box.hi))

    out.append("[domain]")
    out.append(f"n = {p.n}")
    out.append(f"omega = {box_line(p.omega)}")
    for name, box in p.named_boxes:
        out.append(f"box {name} = {box_line(box)}")
    out.append("")
    out.append("[spaces]")
    out.append(f"m = {p.m}")
    out.append(f"p = {'inf' if math.isinf(p.p) else int(p.p)}")
    out.append(f"y_box = {box_line(p.y_box)}")
    out.append(f"z_box = {box_line(p.z_box)}")
    out.append("")
    out.append("[objective]")
    out.append(f"L = {format_expression(p.lagrangian)}")
    if p.boundary_lagrangian != Const(0.0):
        out.append(f"L_boundary = {format_expression(p.boundary_lagrangian)}")
    if p.equality_constraints or p.inequality_constraints or p.integral_constraints or p.weak_families:
        out.append("")
        out.append("[constraints]")
        for e in p.equality_constraints:
            out.append(f"A = {format_expression(e)}")
        for e in p.inequality_constraints:
            out.append(f"B = {format_expression(e)}")
        for e in p.integral_constraints:
            out.append(f"C = {format_expression(e)}")
        for fam in p.weak_families:
            comps = " ; ".join(format_expression(c) for c in fam.components)
            out.append(f"weak {fam.test_space} = {comps}")
    if p.boundary_equality or p.boundary_inequality or p.boundary_integral:
        out.append("")
        out.append("[boundary]")
        for e in p.boundary_equality:
            out.append(f"A = {format_expression(e)}")
        for e in p.boundary_inequality:
            out.append(f"B = {format_expression(e)}")
        for e in p.boundary_integral:
            out.append(f"C = {format_expression(e)}")
    if p.d > 0 or p.d_boundary > 0:
        out.append("")
        out.append("[control]")
        out.append(f"d = {p.d}")
        if p.u_box is not None:
            out.append(f"u_box = {box_line(p.u_box)}")
        if p.d_boundary > 0:
            out.append(f"d_boundary = {p.d_boundary}")
            out.append(f"u_boundary_box = {box_line(p.u_boundary_box)}")
    out.append("")
    return "\n".join(out)


# ---------------------------------------------------------------------------
# validation (shape warnings)

def validate_problem(problem: Problem, samples: int = 64, seed: int = 0) -> list:
    """Shape-probe the problem data and report hypothesis warnings.

    Warnings fire when the no-gap convexity hypotheses look violated (the
    relaxation value is then a lower bound only) or when a finite p means the
    boxes act as truncations of an unbounded problem.
    """
    diags: list = []

    def warn(msg: str) -> None:
        diags.append(Diagnostic("warning", 1, 0, 1, msg))

    lo_y, hi_y = problem.y_box.as_arrays()
    z_lo, z_hi = problem.z_box_matrix()
    bulk_box = {"y": (lo_y, hi_y), "z": (z_lo, z_hi)}
    if problem.d > 0:
        lo_u, hi_u = problem.u_box.as_arrays()
        bulk_box["u"] = (lo_u, hi_u)
    lo_x, hi_x = problem.omega.as_arrays()
    bdry_box = {"y": (lo_y, hi_y)}
    if problem.d_boundary > 0:
        bdry_box["u"] = problem.u_boundary_box.as_arrays()

    rng = np.random.default_rng(seed)
    x_probes = [0.5 * (lo_x + hi_x)] + [lo_x + (hi_x - lo_x) * rng.random(lo_x.shape) for _ in range(2)]

    def shape_of(expr, box):
        # Hypotheses are fiberwise in x: probe (y, z[, u]) with x pinned.
        worst = None
        for x0 in x_probes if "x" in free_blocks(expr) else [None]:
            probe = dict(box)
            if x0 is not None:
                probe["x"] = (x0, x0)
            verdict = probe_shape(expr, probe, samples=samples, seed=seed)
            rank = ("affine", "convex-likely", "nonconvex").index(verdict.kind)
            if worst is None or rank > ("affine", "convex-likely", "nonconvex").index(worst.kind):
                worst = verdict
        return worst

    for label, exprs, want in (
        ("L", (problem.lagrangian,), "convex"),
        ("B", problem.inequality_constraints, "convex"),
        ("C", problem.integral_constraints, "convex"),
        ("A", problem.equality_constraints, "affine"),
    ):
        for i, e in enumerate(exprs):
            verdict = shape_of(e, bulk_box)
            if want == "convex" and verdict.kind == "nonconvex":
                warn(f"{label}[{i}] looks nonconvex in (y, z); relaxation value is a lower bound only")
            if want == "affine" and verdict.kind != "affine":
                warn(f"A[{i}] is not affine in (y, z); no-gap hypotheses do not apply")

    for label, exprs, want in (
        ("boundary L", (problem.boundary_lagrangian,), "convex"),
        ("boundary B", problem.boundary_inequality, "convex"),
        ("boundary C", problem.boundary_integral, "convex"),
        ("boundary A", problem.boundary_equality, "affine"),
    ):
        for i, e in enumerate(exprs):
            if not (free_blocks(e) & {"y", "u"}):
                continue
            verdict = shape_of(e, bdry_box)
            if want == "convex" and verdict.kind == "nonconvex":
                warn(f"{label}[{i}] looks nonconvex in y")
            if want == "affine" and verdict.kind != "affine":
                warn(f"{label}[{i}] is not affine in y")

    if not math.isinf(problem.p):
        warn(f"p = {int(problem.p)} < inf: the declared boxes truncate the admissible space")
    return diags
