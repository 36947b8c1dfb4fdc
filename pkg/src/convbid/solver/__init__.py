"""LP/MILP representation and solvers.

``solve_lp`` dispatches to a named backend.  ``"simplex"`` is the embedded
reference solver (always available); ``"highs"`` delegates to HiGHS via
scipy; ``"auto"`` uses the embedded solver for small problems and HiGHS
once the dense tableau would exceed ``AUTO_DENSE_LIMIT`` entries.
Additional backends can be added with :func:`register_backend`.
"""
from __future__ import annotations

import numpy as np

from . import highs, simplex
from .bnb import branch_and_bound
from .lp import (EQ, GE, LE, LinearProgram, LPBuilder, MixedIntegerProgram, ModelError,
                 Solution, Status)
from .mps import read_mps, write_mps

DEFAULT_TOL = 1e-7
DEFAULT_GAP = 1e-6
AUTO_DENSE_LIMIT = 20_000

_LP_BACKENDS = {"simplex": simplex.solve, "highs": highs.solve_lp}


def register_backend(name, lp_solver):
    """Register ``lp_solver(lp, tol=..., iter_limit=...) -> Solution``."""
    _LP_BACKENDS[name] = lp_solver


def lp_backends():
    return sorted(_LP_BACKENDS) + ["auto"]


def _pick(lp: LinearProgram, backend: str):
    if backend == "auto":
        size = (lp.num_rows + 1) * (lp.num_vars + lp.num_rows)
        backend = "simplex" if size <= AUTO_DENSE_LIMIT else "highs"
    try:
        return _LP_BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown LP backend {backend!r}; choose from {lp_backends()}") from None


def solve_lp(lp: LinearProgram, tol: float = DEFAULT_TOL, iter_limit: int | None = None,
             backend: str = "simplex") -> Solution:
    sol = _pick(lp, backend)(lp, tol=tol, iter_limit=iter_limit)
    if sol.ok:
        viol = lp.max_violation(sol.primal)
        scale = 1.0 + float(np.max(np.abs(sol.primal), initial=0.0))
        if viol > tol * scale * 10:
            sol.message = f"feasibility re-check failed: violation {viol:.3g}"
    return sol


def solve_milp(mip: MixedIntegerProgram, tol: float = DEFAULT_TOL, gap: float = DEFAULT_GAP,
               node_limit: int = 100_000, backend: str = "simplex") -> Solution:
    """Solve a MILP.

    ``backend="highs-milp"`` hands the whole problem to HiGHS; any LP backend
    name runs the embedded branch-and-bound with that backend bounding
    the nodes.
    """
    if backend == "highs-milp":
        return highs.solve_milp(mip, tol=tol, gap=gap, node_limit=node_limit)
    lp_solve = lambda lp, tol: solve_lp(lp, tol=tol, backend=backend)
    return branch_and_bound(mip, lp_solve, tol=tol, gap=gap, node_limit=node_limit)


def is_feasible(lp: LinearProgram, x, tol: float = DEFAULT_TOL) -> bool:
    """Independent constraint-by-constraint check of a candidate point."""
    x = np.asarray(x, dtype=float)
    scale = 1.0 + float(np.max(np.abs(x), initial=0.0))
    return lp.max_violation(x) <= tol * scale


__all__ = [
    "EQ", "GE", "LE", "LinearProgram", "LPBuilder", "MixedIntegerProgram", "ModelError",
    "Solution", "Status", "solve_lp", "solve_milp", "register_backend", "lp_backends",
    "is_feasible", "read_mps", "write_mps", "AUTO_DENSE_LIMIT",
]
