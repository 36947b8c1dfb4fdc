"""External backend: HiGHS through scipy.optimize."""
from __future__ import annotations

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .lp import EQ, GE, LE, LinearProgram, MixedIntegerProgram, Solution, Status


def _row_bounds(lp: LinearProgram):
    lo = np.where(lp.sense == LE, -np.inf, lp.rhs)
    hi = np.where(lp.sense == GE, np.inf, lp.rhs)
    return lo, hi


def solve_lp(lp: LinearProgram, tol=1e-7, iter_limit=None) -> Solution:
    c = -lp.c if lp.maximize else lp.c
    A = lp.A
    le = lp.sense == LE
    ge = lp.sense == GE
    eq = lp.sense == EQ
    ub_rows = le | ge
    A_ub = None
    b_ub = None
    if ub_rows.any():
        flip = np.where(ge, -1.0, 1.0)[ub_rows]
        A_ub = A[ub_rows].multiply(flip[:, None]).tocsr()
        b_ub = lp.rhs[ub_rows] * flip
    A_eq = A[eq] if eq.any() else None
    b_eq = lp.rhs[eq] if eq.any() else None
    options = {"primal_feasibility_tolerance": tol, "dual_feasibility_tolerance": tol,
               "presolve": True}
    if iter_limit is not None:
        options["maxiter"] = int(iter_limit)
    bounds = np.column_stack([lp.lb, lp.ub])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs", options=options)
    status = {0: Status.OPTIMAL, 1: Status.ITERATION_LIMIT, 2: Status.INFEASIBLE,
              3: Status.UNBOUNDED}.get(res.status, Status.INFEASIBLE)
    if status is Status.INFEASIBLE:
        # presolve may report "infeasible" for an unbounded problem; a
        # feasibility solve with zero objective tells the two apart
        feas = linprog(np.zeros_like(c), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                       bounds=bounds, method="highs", options=options)
        if feas.status == 0:
            status = Status.UNBOUNDED
    if status is not Status.OPTIMAL:
        return Solution(status, message=res.message)
    x = np.clip(res.x, lp.lb, lp.ub)
    return Solution(Status.OPTIMAL, lp.objective(x), x, int(getattr(res, "nit", 0)))


def solve_milp(mip: MixedIntegerProgram, tol=1e-7, gap=1e-6, node_limit=None) -> Solution:
    lp = mip.base
    c = -lp.c if lp.maximize else lp.c
    integrality = np.zeros(lp.num_vars)
    integrality[mip.integer_vars] = 1
    lo, hi = _row_bounds(lp)
    cons = [LinearConstraint(lp.A, lo, hi)] if lp.num_rows else []
    options = {"mip_rel_gap": gap, "presolve": True}
    if node_limit is not None:
        options["node_limit"] = int(node_limit)
    res = milp(c, constraints=cons, integrality=integrality,
               bounds=Bounds(lp.lb, lp.ub), options=options)
    if res.status == 0:
        x = res.x.copy()
        x[mip.integer_vars] = np.round(x[mip.integer_vars])
        return Solution(Status.OPTIMAL, lp.objective(x), x)
    if res.status == 1 and res.x is not None:
        return Solution(Status.ITERATION_LIMIT, lp.objective(res.x), res.x, message=res.message)
    status = {1: Status.ITERATION_LIMIT, 2: Status.INFEASIBLE, 3: Status.UNBOUNDED}.get(
        res.status, Status.INFEASIBLE)
    return Solution(status, message=res.message)
