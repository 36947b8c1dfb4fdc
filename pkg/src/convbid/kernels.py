"""Hot inner loops of the bounded-variable primal simplex.

Every helper exists twice: an explicit-loop version that numba compiles and
a vectorized numpy version used when JIT is disabled.  ``run_phase`` is the
shared driver; it is compiled together with the loop helpers or runs as
plain Python over the numpy helpers.

Tableau layout: ``tab`` has shape (m + 1, n).  Rows ``0..m-1`` hold
``B^-1 A`` for the current basis, row ``m`` holds the reduced costs.
Basic variable values live in ``xb``; nonbasic variables sit at 0 or, when
``at_upper`` is set, at ``upper``.  Columns flagged ``free`` have no lower
bound: nonbasic they sit at 0 and may move either way, basic they never
block the ratio test.
"""
import numpy as np

from ._jit import HAS_NUMBA, jit

OPTIMAL = 0
UNBOUNDED = 1
ITERATION_LIMIT = 2


def _price_loops(d, is_basic, at_upper, free, eligible, tol, bland):
    best = -1
    best_score = 0.0
    for j in range(d.shape[0]):
        if is_basic[j] or not eligible[j]:
            continue
        if free[j]:
            score = abs(d[j])
        elif at_upper[j]:
            score = d[j]
        else:
            score = -d[j]
        if score > tol:
            if bland:
                return j
            if score > best_score:
                best_score = score
                best = j
    return best


def _price_numpy(d, is_basic, at_upper, free, eligible, tol, bland):
    score = np.where(free, np.abs(d), np.where(at_upper, d, -d))
    score[is_basic | ~eligible] = 0.0
    cand = np.nonzero(score > tol)[0]
    if cand.size == 0:
        return -1
    if bland:
        return int(cand[0])
    return int(cand[np.argmax(score[cand])])


def _ratio_loops(col, xb, ub_basic, free_basic, basis, sigma, piv_tol, bland):
    m = col.shape[0]
    theta = np.inf
    for i in range(m):
        a = sigma * col[i]
        if a > piv_tol and not free_basic[i]:
            t = max(xb[i], 0.0) / a
        elif a < -piv_tol and ub_basic[i] < np.inf:
            t = max(ub_basic[i] - xb[i], 0.0) / (-a)
        else:
            continue
        if t < theta:
            theta = t
    if theta == np.inf:
        return -1, theta
    slack = 1e-12 * max(1.0, theta)
    row = -1
    best = 0.0
    for i in range(m):
        a = sigma * col[i]
        if a > piv_tol and not free_basic[i]:
            t = max(xb[i], 0.0) / a
        elif a < -piv_tol and ub_basic[i] < np.inf:
            t = max(ub_basic[i] - xb[i], 0.0) / (-a)
        else:
            continue
        if t <= theta + slack:
            if bland:
                if row < 0 or basis[i] < basis[row]:
                    row = i
            elif abs(a) > best:
                best = abs(a)
                row = i
    return row, theta


def _ratio_numpy(col, xb, ub_basic, free_basic, basis, sigma, piv_tol, bland):
    a = sigma * col
    t = np.full(a.shape[0], np.inf)
    dec = (a > piv_tol) & ~free_basic
    inc = (a < -piv_tol) & np.isfinite(ub_basic)
    t[dec] = np.maximum(xb[dec], 0.0) / a[dec]
    t[inc] = np.maximum(ub_basic[inc] - xb[inc], 0.0) / (-a[inc])
    theta = t.min() if t.size else np.inf
    if not np.isfinite(theta):
        return -1, np.inf
    ties = np.nonzero(t <= theta + 1e-12 * max(1.0, theta))[0]
    if bland:
        row = ties[np.argmin(basis[ties])]
    else:
        row = ties[np.argmax(np.abs(a[ties]))]
    return int(row), theta


def _eliminate_loops(tab, r, j):
    rows, cols = tab.shape
    piv = tab[r, j]
    for k in range(cols):
        tab[r, k] /= piv
    for i in range(rows):
        if i == r:
            continue
        f = tab[i, j]
        if f != 0.0:
            for k in range(cols):
                tab[i, k] -= f * tab[r, k]
            tab[i, j] = 0.0
    tab[r, j] = 1.0


def _eliminate_numpy(tab, r, j):
    tab[r] /= tab[r, j]
    f = tab[:, j].copy()
    f[r] = 0.0
    nz = np.nonzero(f)[0]
    if nz.size:
        tab[nz] -= np.outer(f[nz], tab[r])
        tab[nz, j] = 0.0
    tab[r, j] = 1.0


if HAS_NUMBA:
    _price = jit(_price_loops)
    _ratio = jit(_ratio_loops)
    _eliminate = jit(_eliminate_loops)
else:
    _price = _price_numpy
    _ratio = _ratio_numpy
    _eliminate = _eliminate_numpy


def _run_phase(tab, xb, basis, is_basic, at_upper, upper, free, eligible,
               max_iter, opt_tol, piv_tol, degenerate_limit):
    m = tab.shape[0] - 1
    d = tab[m]
    ub_basic = np.empty(m)
    free_basic = np.zeros(m, dtype=np.bool_)
    bland = False
    degenerate = 0
    it = 0
    while it < max_iter:
        j = _price(d, is_basic, at_upper, free, eligible, opt_tol, bland)
        if j < 0:
            return OPTIMAL, it
        sigma = -1.0 if at_upper[j] or (free[j] and d[j] > 0.0) else 1.0
        col = tab[:m, j].copy()
        for i in range(m):
            ub_basic[i] = upper[basis[i]]
            free_basic[i] = free[basis[i]]
        r, theta = _ratio(col, xb, ub_basic, free_basic, basis, sigma, piv_tol, bland)
        flip = upper[j] < np.inf and upper[j] <= theta
        if r < 0 and not flip:
            return UNBOUNDED, it
        if flip:
            theta = upper[j]
        step = sigma * theta
        for i in range(m):
            xb[i] -= step * col[i]
        if flip:
            at_upper[j] = not at_upper[j]
        else:
            leaving = basis[r]
            a = sigma * col[r]
            at_upper[leaving] = a < 0.0
            entering_value = (upper[j] if at_upper[j] else 0.0) + step
            xb[r] = entering_value
            is_basic[leaving] = False
            is_basic[j] = True
            at_upper[j] = False
            basis[r] = j
            _eliminate(tab, r, j)
        # anti-cycling: Bland's rule while stalled on a degenerate vertex; steps
        # below the pivot tolerance are round-off and count as degenerate
        if theta <= piv_tol:
            degenerate += 1
            if degenerate >= degenerate_limit:
                bland = True
        else:
            degenerate = 0
            bland = False
        it += 1
    return ITERATION_LIMIT, it


run_phase = jit(_run_phase) if HAS_NUMBA else _run_phase
