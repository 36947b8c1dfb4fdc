"""Canonical LP / MILP containers, a triplet-based builder, and solutions."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

LE, GE, EQ = "<", ">", "="
_SENSES = (LE, GE, EQ)


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration-limit"


class ModelError(ValueError):
    """Raised for malformed problem data."""


@dataclass(frozen=True)
class LinearProgram:
    """``max/min c @ x`` subject to ``A x (sense) rhs`` and ``lb <= x <= ub``.

    ``A`` is stored as CSR; ``sense`` holds one of ``'<'``, ``'>'``, ``'='``
    per row.
    """

    c: np.ndarray
    A: sp.csr_matrix
    sense: np.ndarray
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    maximize: bool = False
    var_names: tuple[str, ...] | None = None

    def __post_init__(self):
        n = self.c.shape[0]
        if self.A.shape[1] != n or self.lb.shape[0] != n or self.ub.shape[0] != n:
            raise ModelError("dimension mismatch between objective, matrix and bounds")
        if self.A.shape[0] != self.rhs.shape[0] or self.sense.shape[0] != self.rhs.shape[0]:
            raise ModelError("row count mismatch")
        if not np.all(np.isfinite(self.c)) or not np.all(np.isfinite(self.A.data)):
            raise ModelError("non-finite coefficient")
        if not np.all(np.isfinite(self.rhs)):
            raise ModelError("non-finite right-hand side")
        if np.any(self.lb > self.ub) or np.any(self.lb == np.inf) or np.any(self.ub == -np.inf):
            raise ModelError("inconsistent variable bounds")
        if not set(self.sense.tolist()) <= set(_SENSES):
            raise ModelError("unknown row relation")

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    @property
    def num_rows(self) -> int:
        return self.rhs.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x)

    def max_violation(self, x: np.ndarray) -> float:
        """Largest bound or row violation of ``x`` (0 when feasible)."""
        viol = 0.0
        if self.num_vars:
            viol = max(viol, float(np.max(self.lb - x, initial=0.0)))
            viol = max(viol, float(np.max(x - self.ub, initial=0.0)))
        if self.num_rows:
            ax = self.A @ x
            res = ax - self.rhs
            le = self.sense == LE
            ge = self.sense == GE
            eq = self.sense == EQ
            viol = max(viol, float(np.max(res[le], initial=0.0)))
            viol = max(viol, float(np.max(-res[ge], initial=0.0)))
            viol = max(viol, float(np.max(np.abs(res[eq]), initial=0.0)))
        return viol


@dataclass(frozen=True)
class MixedIntegerProgram:
    base: LinearProgram
    integer_vars: np.ndarray

    def __post_init__(self):
        iv = np.asarray(self.integer_vars, dtype=np.int64)
        if iv.size and (iv.min() < 0 or iv.max() >= self.base.num_vars):
            raise ModelError("integer variable index out of range")
        object.__setattr__(self, "integer_vars", np.unique(iv))


@dataclass
class Solution:
    status: Status
    objective_value: float = np.nan
    primal: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0
    nodes: int = 0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


class LPBuilder:
    """Accumulates columns and rows as sparse triplets.

    >>> b = LPBuilder()
    >>> x = b.add_vars(2, lb=0.0, obj=[3.0, 2.0])
    >>> b.add_row(x, [1.0, 1.0], "<", 4.0)
    >>> lp = b.build(maximize=True)
    """

    def __init__(self):
        self._c: list[np.ndarray] = []
        self._lb: list[np.ndarray] = []
        self._ub: list[np.ndarray] = []
        self._names: list[str] = []
        self._n = 0
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self._sense: list[str] = []
        self._rhs: list[float] = []

    @property
    def num_vars(self) -> int:
        return self._n

    @property
    def num_rows(self) -> int:
        return len(self._rhs)

    def add_vars(self, count, lb=0.0, ub=np.inf, obj=0.0, name=None) -> np.ndarray:
        idx = np.arange(self._n, self._n + count, dtype=np.int64)
        self._c.append(np.broadcast_to(np.asarray(obj, dtype=float), (count,)).copy())
        self._lb.append(np.broadcast_to(np.asarray(lb, dtype=float), (count,)).copy())
        self._ub.append(np.broadcast_to(np.asarray(ub, dtype=float), (count,)).copy())
        if name is not None:
            self._names.extend(f"{name}[{i}]" for i in range(count))
        else:
            self._names.extend(f"x{k}" for k in idx)
        self._n += count
        return idx

    def add_row(self, cols, vals, sense, rhs) -> int:
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.broadcast_to(np.asarray(vals, dtype=float), cols.shape).copy()
        if sense not in _SENSES:
            raise ModelError(f"unknown relation {sense!r}")
        if cols.size and (cols.min() < 0 or cols.max() >= self._n):
            raise ModelError("column index out of range")
        keep = vals != 0.0
        r = len(self._rhs)
        self._rows.append(np.full(int(keep.sum()), r, dtype=np.int64))
        self._cols.append(cols[keep])
        self._vals.append(vals[keep])
        self._sense.append(sense)
        self._rhs.append(float(rhs))
        return r

    def add_rows(self, matrix, sense, rhs) -> np.ndarray:
        """Add one row per row of a (sparse or dense) ``matrix`` over all columns."""
        coo = sp.coo_matrix(matrix)
        if coo.shape[1] != self._n:
            raise ModelError("row block width does not match variable count")
        first = len(self._rhs)
        nrows = coo.shape[0]
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), (nrows,))
        keep = coo.data != 0.0
        self._rows.append(coo.row[keep].astype(np.int64) + first)
        self._cols.append(coo.col[keep].astype(np.int64))
        self._vals.append(coo.data[keep].astype(float))
        self._sense.extend([sense] * nrows)
        self._rhs.extend(rhs.tolist())
        return np.arange(first, first + nrows)

    def add_triplets(self, nrows, rows, cols, vals, sense, rhs) -> np.ndarray:
        """Add ``nrows`` rows given as (local row, column, value) triplets."""
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.broadcast_to(np.asarray(vals, dtype=float), rows.shape)
        if rows.size and (rows.min() < 0 or rows.max() >= nrows):
            raise ModelError("row index outside the block")
        if cols.size and (cols.min() < 0 or cols.max() >= self._n):
            raise ModelError("column index out of range")
        return self.add_rows(sp.coo_matrix((vals, (rows, cols)), shape=(nrows, self._n)), sense, rhs)

    def build(self, maximize=False) -> LinearProgram:
        m, n = len(self._rhs), self._n
        cat = lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.zeros(0, dt)
        A = sp.csr_matrix(
            (cat(self._vals, float), (cat(self._rows, np.int64), cat(self._cols, np.int64))),
            shape=(m, n),
        )
        A.sum_duplicates()
        return LinearProgram(
            c=cat(self._c, float),
            A=A,
            sense=np.array(self._sense, dtype="<U1"),
            rhs=np.array(self._rhs, dtype=float),
            lb=cat(self._lb, float),
            ub=cat(self._ub, float),
            maximize=maximize,
            var_names=tuple(self._names),
        )
