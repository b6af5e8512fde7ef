"""Free-format MPS export and import (minimization, LF endings).

Row names are generated deterministically from row tags, the objective row
is ``COST`` and all variables default to [0, inf); free columns are spelled
with bound type FR.  Reparsing our own output reproduces the program exactly,
and re-exporting the reparse is byte-identical.
"""

from __future__ import annotations

import numpy as np

from .lp import REL_EQ, REL_LE, LinearProgram

_TAG_PREFIX = {
    "mass": "MASS",
    "liouville": "LIOU",
    "integral": "INTG",
    "support-integralized": "SUPP",
    "plumbing": "ROW",
}
_PREFIX_TAG = {v: k for k, v in _TAG_PREFIX.items()}


def _num(v: float) -> str:
    return repr(float(v))


def default_row_names(tags) -> list:
    counters: dict = {}
    names = []
    for tag in tags:
        prefix = _TAG_PREFIX.get(tag, "ROW")
        counters[prefix] = counters.get(prefix, 0) + 1
        names.append(f"{prefix}{counters[prefix]:04d}")
    return names


def export_mps(lp: LinearProgram) -> str:
    lines = ["NAME OCCURELAX", "ROWS", " N COST"]
    for name, rel in zip(lp.row_names, lp.rel):
        lines.append(f" {'E' if rel == REL_EQ else 'L'} {name}")
    lines.append("COLUMNS")
    for j, col in enumerate(lp.col_names):
        lines.append(f" {col} COST {_num(lp.c[j])}")
        for i in np.flatnonzero(lp.A[:, j]):
            lines.append(f" {col} {lp.row_names[i]} {_num(lp.A[i, j])}")
    lines.append("RHS")
    for i in np.flatnonzero(lp.b):
        lines.append(f" RHS {lp.row_names[i]} {_num(lp.b[i])}")
    if lp.free_cols is not None and np.any(lp.free_cols):
        lines.append("BOUNDS")
        for j in np.flatnonzero(lp.free_cols):
            lines.append(f" FR BND {lp.col_names[j]}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def parse_mps(text: str) -> LinearProgram:
    section = None
    row_order: list = []
    row_rel: dict = {}
    col_order: list = []
    col_entries: dict = {}
    rhs: dict = {}
    free: set = set()
    objective_row = None

    for raw in text.splitlines():
        stripped = raw.strip()
        if not stripped or stripped.startswith("*"):
            continue
        if not raw[0].isspace():
            head = stripped.split()
            section = head[0]
            continue
        fields = stripped.split()
        if section == "ROWS":
            kind, name = fields
            if kind == "N":
                objective_row = name
            else:
                row_order.append(name)
                row_rel[name] = REL_EQ if kind == "E" else REL_LE
        elif section == "COLUMNS":
            col, pairs = fields[0], fields[1:]
            if col not in col_entries:
                col_entries[col] = {}
                col_order.append(col)
            for k in range(0, len(pairs), 2):
                col_entries[col][pairs[k]] = float(pairs[k + 1])
        elif section == "RHS":
            pairs = fields[1:]
            for k in range(0, len(pairs), 2):
                rhs[pairs[k]] = float(pairs[k + 1])
        elif section == "BOUNDS":
            kind, _, col = fields[:3]
            if kind == "FR":
                free.add(col)
            else:
                raise ValueError(f"unsupported bound type {kind!r}")

    if objective_row is None:
        raise ValueError("missing objective (N) row")
    nrows, ncols = len(row_order), len(col_order)
    A = np.zeros((nrows, ncols))
    c = np.zeros(ncols)
    row_index = {name: i for i, name in enumerate(row_order)}
    for j, col in enumerate(col_order):
        for row, val in col_entries[col].items():
            if row == objective_row:
                c[j] = val
            else:
                A[row_index[row], j] = val
    b = np.array([rhs.get(name, 0.0) for name in row_order])
    rel = np.array([row_rel[name] for name in row_order], dtype=np.int8)
    tags = []
    for name in row_order:
        prefix = "".join(ch for ch in name if not ch.isdigit())
        tags.append(_PREFIX_TAG.get(prefix, "plumbing"))
    free_mask = None
    if free:
        free_mask = np.array([col in free for col in col_order])
    return LinearProgram(
        c=c, A=A, b=b, rel=rel,
        row_tags=tags, row_names=row_order, col_names=col_order,
        free_cols=free_mask,
    )
