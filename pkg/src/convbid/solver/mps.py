"""Fixed-format MPS export/import for cross-checking with external solvers.

Row names are ``R0000001``..., column names ``C0000001``... (8 characters,
so the fixed column layout is respected).  The objective row is ``COST``.
Maximization is written with an ``OBJSENSE MAX`` section, which HiGHS,
CPLEX, Gurobi and CBC all accept.  Integer columns are wrapped in
``MARKER INTORG/INTEND`` pairs.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .lp import EQ, GE, LE, LinearProgram, MixedIntegerProgram

_ROW_TYPE = {LE: "L", GE: "G", EQ: "E"}
_SENSE = {"L": LE, "G": GE, "E": EQ}


def _line(f1="", f2="", f3="", f4="", f5="", f6=""):
    out = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}"
    if f5:
        out += f"   {f5:<8}  {f6:>12}"
    return out.rstrip()


def _num(v: float) -> str:
    s = f"{v:.12g}"
    if len(s) > 12:
        s = f"{v:.6e}"
    return s


def write_mps(problem, path, name="CONVBID"):
    if isinstance(problem, MixedIntegerProgram):
        lp, ints = problem.base, set(problem.integer_vars.tolist())
    else:
        lp, ints = problem, set()
    rname = [f"R{i + 1:07d}" for i in range(lp.num_rows)]
    cname = [f"C{j + 1:07d}" for j in range(lp.num_vars)]
    lines = [f"NAME          {name}"]
    if lp.maximize:
        lines += ["OBJSENSE", "    MAX"]
    lines.append("ROWS")
    lines.append(_line("N", "COST"))
    for i in range(lp.num_rows):
        lines.append(_line(_ROW_TYPE[lp.sense[i]], rname[i]))
    lines.append("COLUMNS")
    csc = sp.csc_matrix(lp.A)
    in_int = False
    for j in range(lp.num_vars):
        if (j in ints) != in_int:
            tag = "'INTORG'" if not in_int else "'INTEND'"
            lines.append(f"    MARKER                 'MARKER'                 {tag}")
            in_int = not in_int
        if lp.c[j] != 0.0:
            lines.append(_line("", cname[j], "COST", _num(lp.c[j])))
        start, end = csc.indptr[j], csc.indptr[j + 1]
        for i, v in zip(csc.indices[start:end], csc.data[start:end]):
            lines.append(_line("", cname[j], rname[i], _num(v)))
        if lp.c[j] == 0.0 and start == end:
            lines.append(_line("", cname[j], "COST", "0"))
    if in_int:
        lines.append("    MARKER                 'MARKER'                 'INTEND'")
    lines.append("RHS")
    for i in range(lp.num_rows):
        if lp.rhs[i] != 0.0:
            lines.append(_line("", "RHS", rname[i], _num(lp.rhs[i])))
    lines.append("BOUNDS")
    for j in range(lp.num_vars):
        lo, hi = lp.lb[j], lp.ub[j]
        if lo == hi:
            lines.append(_line("FX", "BND", cname[j], _num(lo)))
            continue
        if lo == -np.inf and hi == np.inf:
            lines.append(_line("FR", "BND", cname[j]))
            continue
        if lo == -np.inf:
            lines.append(_line("MI", "BND", cname[j]))
        elif lo != 0.0:
            lines.append(_line("LO", "BND", cname[j], _num(lo)))
        if hi != np.inf:
            lines.append(_line("UP", "BND", cname[j], _num(hi)))
        elif j in ints:
            lines.append(_line("PL", "BND", cname[j]))
    lines.append("ENDATA")
    text = "\n".join(lines) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    return text


def read_mps(path):
    """Parse a file written by :func:`write_mps`.

    Returns a :class:`LinearProgram`, or a :class:`MixedIntegerProgram`
    when integer markers are present.
    """
    section = None
    maximize = False
    rows: dict[str, int] = {}
    senses: list[str] = []
    cols: dict[str, int] = {}
    trip_r, trip_c, trip_v = [], [], []
    cost: dict[int, float] = {}
    rhs: dict[int, float] = {}
    bounds: list[tuple[str, str, float]] = []
    ints: set[int] = set()
    in_int = False
    with open(path) as fh:
        for raw in fh:
            if not raw.strip() or raw.startswith("*"):
                continue
            if not raw[0].isspace():
                section = raw.split()[0]
                continue
            tok = raw.split()
            if section == "OBJSENSE":
                maximize = tok[0].upper() == "MAX"
            elif section == "ROWS":
                if tok[0] == "N":
                    continue
                rows[tok[1]] = len(senses)
                senses.append(_SENSE[tok[0]])
            elif section == "COLUMNS":
                if len(tok) >= 3 and tok[1] == "'MARKER'":
                    in_int = tok[2] == "'INTORG'"
                    continue
                j = cols.setdefault(tok[0], len(cols))
                if in_int:
                    ints.add(j)
                for rn, val in zip(tok[1::2], tok[2::2]):
                    if rn == "COST":
                        cost[j] = float(val)
                    else:
                        trip_r.append(rows[rn]); trip_c.append(j); trip_v.append(float(val))
            elif section == "RHS":
                for rn, val in zip(tok[1::2], tok[2::2]):
                    rhs[rows[rn]] = float(val)
            elif section == "BOUNDS":
                bounds.append((tok[0], tok[2], float(tok[3]) if len(tok) > 3 else 0.0))
    n, m = len(cols), len(senses)
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    for kind, cn, val in bounds:
        j = cols[cn]
        if kind == "UP":
            ub[j] = val
        elif kind == "LO":
            lb[j] = val
        elif kind == "FX":
            lb[j] = ub[j] = val
        elif kind == "FR":
            lb[j], ub[j] = -np.inf, np.inf
        elif kind == "MI":
            lb[j] = -np.inf
        elif kind == "PL":
            ub[j] = np.inf
    c = np.zeros(n)
    for j, v in cost.items():
        c[j] = v
    b = np.zeros(m)
    for i, v in rhs.items():
        b[i] = v
    A = sp.csr_matrix((trip_v, (trip_r, trip_c)), shape=(m, n))
    lp = LinearProgram(c=c, A=A, sense=np.array(senses, dtype="<U1"), rhs=b, lb=lb, ub=ub,
                       maximize=maximize)
    if ints:
        return MixedIntegerProgram(lp, np.array(sorted(ints)))
    return lp
