"""Branch-and-bound over LP relaxations.

Depth-first search with best-bound tie-breaking, branching on the most
fractional integer variable.  Any LP solver with the ``solve_lp``
signature can bound the nodes.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import replace

import numpy as np

from .lp import MixedIntegerProgram, Solution, Status


def branch_and_bound(mip: MixedIntegerProgram, lp_solve, tol=1e-7, gap=1e-6,
                     node_limit=100_000) -> Solution:
    lp = mip.base
    ints = mip.integer_vars
    sign = -1.0 if lp.maximize else 1.0  # search minimizes sign * objective
    lb0 = lp.lb.copy()
    ub0 = lp.ub.copy()
    lb0[ints] = np.ceil(lb0[ints] - tol)
    ub0[ints] = np.floor(ub0[ints] + tol)
    if np.any(lb0 > ub0):
        return Solution(Status.INFEASIBLE)

    best_x = None
    best_val = np.inf
    counter = itertools.count()
    heap = [(0, -np.inf, next(counter), lb0, ub0)]
    nodes = 0
    iters = 0
    root_status = None

    while heap:
        if nodes >= node_limit:
            status = Status.ITERATION_LIMIT
            if best_x is None:
                return Solution(status, nodes=nodes, iterations=iters, message="node limit")
            return Solution(status, sign * best_val, best_x, iters, nodes, "node limit")
        neg_depth, parent_bound, _, lb, ub = heapq.heappop(heap)
        if best_x is not None and parent_bound >= best_val - _slack(best_val, gap, tol):
            continue
        nodes += 1
        sol = lp_solve(replace(lp, lb=lb, ub=ub), tol=tol)
        iters += sol.iterations
        if root_status is None:
            root_status = sol.status
        if sol.status is Status.UNBOUNDED:
            if best_x is None and nodes == 1:
                return Solution(Status.UNBOUNDED, nodes=nodes, iterations=iters)
            continue
        if sol.status is not Status.OPTIMAL:
            continue
        val = sign * sol.objective_value
        if best_x is not None and val >= best_val - _slack(best_val, gap, tol):
            continue
        x = sol.primal
        frac = np.abs(x[ints] - np.round(x[ints]))
        if ints.size == 0 or frac.max() <= tol * 10:
            xr = x.copy()
            xr[ints] = np.round(xr[ints])
            best_x, best_val = xr, sign * lp.objective(xr)
            continue
        k = int(np.argmax(frac))
        j = ints[k]
        down_ub = ub.copy()
        down_ub[j] = np.floor(x[j])
        up_lb = lb.copy()
        up_lb[j] = np.ceil(x[j])
        children = [(lb, down_ub), (up_lb, ub)]
        if x[j] - np.floor(x[j]) >= 0.5:
            children.reverse()
        # pushed in preference order; the counter keeps that order among equals
        for clb, cub in children:
            heapq.heappush(heap, (neg_depth - 1, val, next(counter), clb, cub))

    if best_x is None:
        return Solution(Status.INFEASIBLE, nodes=nodes, iterations=iters)
    return Solution(Status.OPTIMAL, sign * best_val, best_x, iters, nodes)


def _slack(best, gap, tol):
    return max(gap * max(1.0, abs(best)), tol)
