"""Embedded two-phase bounded-variable primal simplex.

Bounded columns are shifted to ``x' >= 0`` with optional finite upper
bounds, columns without bounds stay free (never split), slacks are appended, and rows are sign-normalized so the right-hand side
is nonnegative.  Phase I minimizes the sum of artificials; phase II the
original objective.  Pricing is Dantzig's rule with a fallback to Bland's
rule on degenerate stalls.  After phase II the primal is recomputed from
the final basis with a dense solve to shed accumulated pivot error.
"""
from __future__ import annotations

import numpy as np

from .. import kernels
from .lp import EQ, GE, LE, LinearProgram, Solution, Status

PIVOT_TOL = 1e-9
OPT_TOL = 1e-9
DEGENERATE_LIMIT = 30
REFACTOR_EVERY = 100
MAX_REOPT = 5
PERTURB = 1e-6
PERTURB_SEED = 20240601


class _StandardForm:
    """Map between the user LP and ``min c'x' s.t. A'x' = b, 0 <= x' <= u`` (free columns unbounded)."""

    def __init__(self, lp: LinearProgram):
        n = lp.num_vars
        lb, ub = lp.lb, lp.ub
        fin_l = np.isfinite(lb)
        fin_u = np.isfinite(ub)
        self.kind = np.where(fin_l, 0, np.where(fin_u, 1, 2))  # shift / mirror / free
        self.offset = np.where(fin_l, lb, np.where(fin_u, ub, 0.0))
        self.owner = np.arange(n, dtype=np.int64)
        self.sign = np.where(self.kind == 1, -1.0, 1.0)
        nx = n
        upper = np.full(nx, np.inf)
        shifted = self.kind[self.owner] == 0
        upper[shifted] = (ub - lb)[self.owner[shifted]]

        Ad = lp.A.toarray() if lp.num_rows else np.zeros((0, n))
        Ax = Ad[:, self.owner] * self.sign
        b = lp.rhs - Ad @ self.offset
        c_user = -lp.c if lp.maximize else lp.c
        cx = c_user[self.owner] * self.sign
        self.const = float(c_user @ self.offset)

        m = lp.num_rows
        slack_sign = np.where(lp.sense == LE, 1.0, np.where(lp.sense == GE, -1.0, 0.0))
        has_slack = lp.sense != EQ
        ns = int(has_slack.sum())
        S = np.zeros((m, ns))
        slack_rows = np.nonzero(has_slack)[0]
        S[slack_rows, np.arange(ns)] = slack_sign[slack_rows]
        A_std = np.hstack([Ax, S])
        flip = b < 0
        A_std[flip] *= -1.0
        b = np.where(flip, -b, b)

        self.m = m
        self.nx = nx
        self.ns = ns
        self.A = A_std
        self.b = b
        self.c = np.concatenate([cx, np.zeros(ns)])
        self.upper = np.concatenate([upper, np.full(ns, np.inf)])
        self.free = np.concatenate([self.kind == 2, np.zeros(ns, dtype=bool)])
        # rows whose own slack has +1 after normalization can start with it basic
        self.start = np.full(m, -1, dtype=np.int64)
        for k, r in enumerate(slack_rows):
            if A_std[r, nx + k] > 0:
                self.start[r] = nx + k

    def recover(self, xs: np.ndarray, n: int) -> np.ndarray:
        x = self.offset.copy()
        np.add.at(x, self.owner, self.sign * xs[: self.nx])
        return x


def solve(lp: LinearProgram, tol: float = 1e-7, iter_limit: int | None = None) -> Solution:
    """Solve with a perturbed right-hand side first, then unperturbed if that fails.

    The perturbation breaks the ties that stall pivoting on degenerate
    vertices.  Reduced costs do not depend on the right-hand side, so the
    final basis is optimal for the original problem whenever its basic
    values, recomputed from the original right-hand side, are feasible.
    """
    if lp.num_vars == 0:
        if lp.num_rows and lp.max_violation(np.zeros(0)) > tol:
            return Solution(Status.INFEASIBLE)
        return Solution(Status.OPTIMAL, 0.0, np.zeros(0))
    sf = _StandardForm(lp)
    if iter_limit is None:
        iter_limit = max(10_000, 20 * (sf.m + sf.A.shape[1]))
    rng = np.random.default_rng(PERTURB_SEED)
    shift = PERTURB * (1.0 + np.abs(sf.b)) * rng.uniform(0.5, 1.0, sf.m)
    sol = _attempt(sf, lp, tol, iter_limit, sf.b + shift)
    if sol.ok or sol.status is Status.INFEASIBLE:
        return sol
    retry = _attempt(sf, lp, tol, iter_limit, None)
    retry.iterations += sol.iterations
    return retry


def _attempt(sf: _StandardForm, lp: LinearProgram, tol, iter_limit, b_work) -> Solution:
    perturbed = b_work is not None
    b_work = sf.b if b_work is None else b_work
    m, N = sf.A.shape

    art_rows = np.nonzero(sf.start < 0)[0]
    na = art_rows.shape[0]
    total = N + na
    tab = np.zeros((m + 1, total))
    tab[:m, :N] = sf.A
    tab[art_rows, N + np.arange(na)] = 1.0
    M = tab[:m].copy()
    upper = np.concatenate([sf.upper, np.full(na, np.inf)])
    free = np.concatenate([sf.free, np.zeros(na, dtype=np.bool_)])
    basis = sf.start.copy()
    basis[art_rows] = N + np.arange(na)
    is_basic = np.zeros(total, dtype=np.bool_)
    is_basic[basis] = True
    at_upper = np.zeros(total, dtype=np.bool_)
    eligible = np.ones(total, dtype=np.bool_)
    # artificials start basic; once one leaves it may never re-enter
    eligible[N:] = False
    xb = b_work.astype(float).copy()
    iters = 0

    if na:
        c1 = np.zeros(total)
        c1[N:] = 1.0
        tab[m] = c1 - c1[basis] @ tab[:m]
        status, it = _phase(M, b_work, c1, tab, xb, basis, is_basic, at_upper, upper, free,
                            eligible, iter_limit)
        iters += it
        if status == kernels.ITERATION_LIMIT:
            return Solution(Status.ITERATION_LIMIT, iterations=iters, message="phase I")
        infeas = float(np.sum(np.where(basis >= N, xb, 0.0)))
        limit = tol * max(1.0, float(np.max(b_work, initial=0.0)))
        # a point feasible for the original rows leaves at most the shift on the
        # artificial rows, so a larger residual proves infeasibility outright
        if perturbed:
            limit += float(np.sum(b_work[art_rows] - sf.b[art_rows]))
        if infeas > limit:
            return Solution(Status.INFEASIBLE, iterations=iters)
        # drive remaining (zero-valued) artificials out of the basis
        for r in np.nonzero(basis >= N)[0]:
            row = np.abs(tab[r, :N])
            row[is_basic[:N]] = 0.0
            j = int(np.argmax(row)) if N else -1
            if j < 0 or row[j] <= 1e-9:
                continue  # redundant row; artificial stays basic at zero
            leaving = basis[r]
            value = upper[j] if at_upper[j] else 0.0
            kernels._eliminate(tab, r, j)
            basis[r] = j
            is_basic[leaving] = False
            is_basic[j] = True
            at_upper[j] = False
            xb[r] = value
        eligible[N:] = False
        upper[N:] = np.where(is_basic[N:], np.inf, 0.0)

    c2 = np.concatenate([sf.c, np.zeros(na)])
    tab[m] = c2 - c2[basis] @ tab[:m]
    status, it = _phase(M, b_work, c2, tab, xb, basis, is_basic, at_upper, upper, free,
                        eligible, iter_limit - iters)
    iters += it
    if status == kernels.UNBOUNDED:
        return Solution(Status.UNBOUNDED, iterations=iters)
    if status == kernels.ITERATION_LIMIT:
        return Solution(Status.ITERATION_LIMIT, iterations=iters, message="phase II")

    if perturbed:
        xs = _unperturb(M, sf.b, basis, is_basic, at_upper, upper, free, N, tol)
        if xs is None:
            return Solution(Status.ITERATION_LIMIT, iterations=iters,
                            message="perturbed optimal basis is infeasible for the original problem")
    else:
        xs = _refine(sf, basis, at_upper, upper, xb, N)
    x = sf.recover(xs, lp.num_vars)
    x = np.clip(x, lp.lb, lp.ub)
    scale = 1.0 + float(np.max(np.abs(x), initial=0.0))
    viol = lp.max_violation(x)
    if viol > tol * scale:
        return Solution(Status.ITERATION_LIMIT, iterations=iters,
                        message=f"numerical trouble: final point violates constraints by {viol:.3g}")
    return Solution(Status.OPTIMAL, lp.objective(x), x, iterations=iters)


def _reinvert(M, b, cost, tab, xb, basis, is_basic, at_upper, upper) -> bool:
    """Rebuild ``tab`` and ``xb`` from the original matrix for the current basis."""
    m = M.shape[0]
    if m == 0:
        tab[0] = cost
        return True
    B = M[:, basis]
    nb_up = ~is_basic & at_upper
    rhs = b - M[:, nb_up] @ upper[nb_up]
    try:
        sol = np.linalg.solve(B, np.column_stack([M, rhs]))
    except np.linalg.LinAlgError:
        return False
    if not np.all(np.isfinite(sol)):
        return False
    tab[:m] = sol[:, :-1]
    xb[:] = sol[:, -1]
    tab[m] = cost - cost[basis] @ tab[:m]
    return True


def _phase(M, b, cost, tab, xb, basis, is_basic, at_upper, upper, free, eligible, limit):
    """Run one simplex phase in chunks, refactoring between chunks and at the optimum."""
    done = 0
    reopt = 0
    while True:
        chunk = min(REFACTOR_EVERY, limit - done)
        if chunk <= 0:
            return kernels.ITERATION_LIMIT, done
        status, it = kernels.run_phase(tab, xb, basis, is_basic, at_upper, upper, free,
                                       eligible, chunk, OPT_TOL, PIVOT_TOL, DEGENERATE_LIMIT)
        done += it
        if status == kernels.UNBOUNDED:
            return status, done
        ok = _reinvert(M, b, cost, tab, xb, basis, is_basic, at_upper, upper)
        if status == kernels.OPTIMAL:
            # confirm optimality against the freshly factored reduced costs
            if not ok or reopt >= MAX_REOPT:
                return status, done
            j = kernels._price(tab[-1], is_basic, at_upper, free, eligible, OPT_TOL, False)
            if j < 0:
                return status, done
            reopt += 1


def _unperturb(M, b, basis, is_basic, at_upper, upper, free, N, tol):
    """Basic values of the final basis under the original right-hand side, or None if infeasible."""
    x = np.zeros(M.shape[1])
    nb_up = ~is_basic & at_upper
    x[nb_up] = upper[nb_up]
    if M.shape[0]:
        try:
            x[basis] = np.linalg.solve(M[:, basis], b - M @ x)
        except np.linalg.LinAlgError:
            return None
    if not np.all(np.isfinite(x)):
        return None
    ftol = tol * (1.0 + float(np.max(np.abs(x), initial=0.0)))
    bounded = ~free
    if np.any(x[bounded] < -ftol) or np.any(x > upper + ftol) or np.any(np.abs(x[N:]) > ftol):
        return None
    x = np.where(bounded, np.clip(x, 0.0, upper), x)
    return x[:N]


def _refine(sf, basis, at_upper, upper, xb, N):
    """Recompute basic values from the final basis with a fresh factorization."""
    xs = np.zeros(N)
    nb = np.ones(N, dtype=bool)
    real = basis < N
    nb[basis[real]] = False
    up = nb & at_upper[:N]
    xs[up] = upper[:N][up]
    if not real.all():
        xs[basis[real]] = xb[real]
        return xs
    B = sf.A[:, basis]
    rhs = sf.b - sf.A[:, nb] @ xs[nb]
    try:
        xbasic = np.linalg.solve(B, rhs)
    except np.linalg.LinAlgError:
        xbasic = xb
    if not np.all(np.isfinite(xbasic)) or np.max(np.abs(xbasic - xb), initial=0.0) > 1e-6 * (1 + np.max(np.abs(xb), initial=0.0)):
        xbasic = xb
    xs[basis] = xbasic
    return np.where(sf.free, xs, np.maximum(xs, 0.0))
