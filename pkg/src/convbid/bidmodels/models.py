"""Sample-based mean / expected-shortfall bid models.

Every builder returns a :class:`BuiltModel`: the optimization problem plus a
:class:`VariableMap` telling which columns carry bid volumes and prices.
All models maximize the mean sample revenue ``(1/T) sum_t r_t`` subject to

    z_t >= tau - r_t,  z_t >= 0,  -tau + (1/K) sum_t z_t <= rho

with ``K = floor(alpha T)``.  The ES block is omitted when ``rho`` is
infinite.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from ..errors import ModelTooLargeError, NoModelError
from ..market_data import TrainingWindow
from ..risk import k_of
from ..solver import (EQ, GE, LE, LinearProgram, LPBuilder, MixedIntegerProgram, Solution,
                      solve_lp, solve_milp)
from .config import SIDES, ModelConfig, Side
from .matrices import CandidatePrices, build_cleared_delta_matrix, candidate_prices

SAMPLE_VP = "sample-VP"
SAMPLE_VP_MILP = "sample-VP-MILP"
SAMPLE_V = "sample-V"
SAMPLE_P = "sample-P"
SAMPLE_P_MILP = "sample-P-MILP"


@dataclass(frozen=True)
class SegmentVars:
    """Where one potential bid segment lives in the solution vector.

    Either ``weight_col`` (a volume column) or ``fixed_volume`` is set, and
    either ``price_col`` (a price column) or ``price`` is set.  A ``price``
    of ``None`` together with no ``price_col`` means "use the configured
    always-clear price".
    """

    node: str
    side: Side
    weight_col: int | None = None
    price: float | None = None
    price_col: int | None = None
    fixed_volume: float | None = None
    snap: np.ndarray | None = field(default=None, compare=False, repr=False)


@dataclass
class VariableMap:
    kind: str
    target_hour: np.datetime64
    segments: list[SegmentVars]
    r_idx: np.ndarray
    z_idx: np.ndarray | None
    tau_idx: int | None
    K: int
    rho: float

    @property
    def weight_cols(self) -> np.ndarray:
        return np.array([s.weight_col for s in self.segments if s.weight_col is not None],
                        dtype=np.int64)

    def revenues(self, solution: Solution) -> np.ndarray:
        return solution.primal[self.r_idx]


class BuiltModel(NamedTuple):
    program: LinearProgram | MixedIntegerProgram
    varmap: VariableMap

    @property
    def is_mip(self) -> bool:
        return isinstance(self.program, MixedIntegerProgram)


def _tail_count(alpha, T, rho) -> int:
    # the tail count is only needed when the ES block is present
    return k_of(alpha, T) if np.isfinite(rho) else 0


def _es_block(b: LPBuilder, r_idx, K, rho):
    if not np.isfinite(rho):
        return None, None
    T = len(r_idx)
    z = b.add_vars(T, lb=0.0, name="z")
    tau = int(b.add_vars(1, lb=-np.inf, name="tau")[0])
    t = np.arange(T)
    # z_t + r_t - tau >= 0
    b.add_triplets(T, np.repeat(t, 3), np.column_stack([z, r_idx, np.full(T, tau)]).ravel(),
                   np.tile([1.0, 1.0, -1.0], T), GE, 0.0)
    b.add_row(np.concatenate([[tau], z]), np.concatenate([[-1.0], np.full(T, 1.0 / K)]), LE, rho)
    return z, tau


def clear_counts(lam, prices, side) -> np.ndarray:
    """How many candidates each sample clears.

    Cleared candidates always form a prefix of the clearing order
    (ascending prices for supply, descending for demand).
    """
    prices = np.asarray(prices, dtype=float)
    if Side(side) is Side.SUPPLY:
        return np.searchsorted(prices, lam, side="right")
    return prices.size - np.searchsorted(prices, lam, side="left")


class _RevenueTerms:
    """Accumulates the right-hand side of ``r_t = sum(...)`` as triplets."""

    def __init__(self, T):
        self.T = T
        self.rows, self.cols, self.vals = [], [], []

    def add(self, rows, cols, vals):
        self.rows.append(np.asarray(rows, dtype=np.int64))
        self.cols.append(np.asarray(cols, dtype=np.int64))
        self.vals.append(np.asarray(vals, dtype=float))

    def add_matrix(self, D, wcols):
        t, q = np.nonzero(D)
        self.add(t, np.asarray(wcols)[q], D[t, q])

    def add_cumulative(self, b: LPBuilder, wcols, lam, delta, prices, side, name):
        """Exact sparse form of ``D w``: one running volume per clearing-order prefix.

        ``c_m = c_{m-1} + w_(m)`` along the clearing order, and sample ``t``
        earns ``delta_t * c_{k_t}`` where ``k_t`` counts its cleared candidates.
        """
        wcols = np.asarray(wcols, dtype=np.int64)
        P = wcols.size
        order = wcols if Side(side) is Side.SUPPLY else wcols[::-1]
        c = b.add_vars(P, lb=-np.inf, name=name)
        m = np.arange(P)
        rows = [m, m, m[1:]]
        cols = [c, order, c[:-1]]
        vals = [np.ones(P), -np.ones(P), -np.ones(P - 1)]
        b.add_triplets(P, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), EQ, 0.0)
        k = clear_counts(lam, prices, side)
        t = np.nonzero((k > 0) & (delta != 0))[0]
        self.add(t, c[k[t] - 1], delta[t])

    def rows_for(self, b: LPBuilder, r_idx):
        """Rows ``r_t - sum(terms) = 0``."""
        T = self.T
        rows = np.concatenate(self.rows + [np.arange(T)])
        cols = np.concatenate(self.cols + [np.asarray(r_idx, dtype=np.int64)])
        vals = np.concatenate([-v for v in self.vals] + [np.ones(T)])
        b.add_triplets(T, rows, cols, vals, EQ, 0.0)


def _volume_rows(b: LPBuilder, groups, config: ModelConfig, per_position=True):
    """Total L1 volume, per-position caps and optional net-volume bounds.

    ``groups`` is a list of ``(side, columns)``; volumes are signed
    (supply >= 0, demand <= 0), so ``|w| = side.sign * w``.
    """
    all_cols = np.concatenate([c for _, c in groups]) if groups else np.zeros(0, np.int64)
    signs = np.concatenate([np.full(len(c), s.sign) for s, c in groups]) if groups else np.zeros(0)
    if all_cols.size:
        b.add_row(all_cols, signs, LE, config.total_volume)
    if per_position:
        for side, cols in groups:
            if len(cols) > 1:
                b.add_row(cols, side.sign, LE, config.per_position_cap)
    lo, hi = config.net_volume_bounds
    if all_cols.size and np.isfinite(lo):
        b.add_row(all_cols, 1.0, GE, lo)
    if all_cols.size and np.isfinite(hi):
        b.add_row(all_cols, 1.0, LE, hi)


def _bounds(side: Side, cap: float):
    return (0.0, cap) if side is Side.SUPPLY else (-cap, 0.0)


def _positions(positions):
    out = [(str(n), Side(s)) for n, s in positions]
    if not out:
        raise NoModelError("no positions given")
    return out


MATRIX = "matrix"
CUMULATIVE = "cumulative"


def _candidate_terms(terms, b, window, node, side, cands, wcols, formulation):
    if formulation == MATRIX:
        terms.add_matrix(build_cleared_delta_matrix(window, node, side, cands).matrix, wcols)
    elif formulation == CUMULATIVE:
        terms.add_cumulative(b, wcols, window.da_of(node), window.delta_of(node), cands.prices,
                             side, f"c[{node},{side.value}]")
    else:
        raise ValueError(f"unknown formulation {formulation!r}")


def build_sample_vp(window: TrainingWindow, positions, config: ModelConfig,
                    formulation: str = CUMULATIVE, candidates=None) -> BuiltModel:
    """Volume-price LP over candidate-price columns for every position.

    ``formulation="matrix"`` writes ``r = sum D w`` with the cleared-delta
    matrices verbatim; the default ``"cumulative"`` form is the same LP
    projected onto fewer nonzeros (see :meth:`_RevenueTerms.add_cumulative`).
    ``candidates`` optionally maps ``(node, side)`` to an explicit price list
    replacing the training day-ahead prices of that position.
    """
    positions = _positions(positions)
    T = window.T
    rho = config.total_volume * config.rho_tilde
    K = _tail_count(config.alpha, T, rho)
    b = LPBuilder()
    terms = _RevenueTerms(T)
    segs, groups = [], []
    cap = config.per_position_cap
    override = {(str(n), Side(sd)): p for (n, sd), p in (candidates or {}).items()}
    for node, side in positions:
        if (node, side) in override:
            cands = CandidatePrices(node, side, np.unique(np.asarray(override[(node, side)], float)))
        else:
            cands = candidate_prices(window, node, side, config.price_bounds(side))
        if len(cands) == 0:
            continue
        lo, hi = _bounds(side, cap)
        cols = b.add_vars(len(cands), lb=lo, ub=hi, name=f"w[{node},{side.value}]")
        _candidate_terms(terms, b, window, node, side, cands, cols, formulation)
        groups.append((side, cols))
        segs.extend(SegmentVars(node, side, int(c), float(p)) for c, p in zip(cols, cands.prices))
    if not segs:
        raise NoModelError("every position has an empty candidate price set")
    r = b.add_vars(T, lb=-np.inf, obj=1.0 / T, name="r")
    terms.rows_for(b, r)
    _volume_rows(b, groups, config)
    z, tau = _es_block(b, r, K, rho)
    vm = VariableMap(SAMPLE_VP, window.target_hour, segs, r, z, tau, K, rho)
    return BuiltModel(b.build(maximize=True), vm)


def build_sample_v(window: TrainingWindow, positions, config: ModelConfig) -> BuiltModel:
    """Volume-only LP: every bid clears, so ``r_t = sum_j w_j delta_t``."""
    positions = _positions(positions)
    T = window.T
    rho = config.total_volume * config.rho_tilde
    K = _tail_count(config.alpha, T, rho)
    b = LPBuilder()
    segs, groups = [], []
    D = np.empty((T, len(positions)))
    cols = np.empty(len(positions), dtype=np.int64)
    for k, (node, side) in enumerate(positions):
        lo, hi = _bounds(side, config.per_position_cap)
        col = b.add_vars(1, lb=lo, ub=hi, name=f"w[{node},{side.value}]")
        cols[k] = col[0]
        D[:, k] = window.delta_of(node)
        groups.append((side, col))
        segs.append(SegmentVars(node, side, int(col[0])))
    r = b.add_vars(T, lb=-np.inf, obj=1.0 / T, name="r")
    terms = _RevenueTerms(T)
    terms.add_matrix(D, cols)
    terms.rows_for(b, r)
    _volume_rows(b, groups, config, per_position=False)
    z, tau = _es_block(b, r, K, rho)
    vm = VariableMap(SAMPLE_V, window.target_hour, segs, r, z, tau, K, rho)
    return BuiltModel(b.build(maximize=True), vm)


def build_sample_p_lp(window: TrainingWindow, node, side, config: ModelConfig,
                      formulation: str = CUMULATIVE) -> BuiltModel:
    """Unit volume spread over candidate prices of one (node, side)."""
    side = Side(side)
    T = window.T
    K = _tail_count(config.alpha, T, config.rho_tilde)
    cands = candidate_prices(window, node, side, config.price_bounds(side))
    if len(cands) == 0:
        raise NoModelError(f"no candidate prices for {node} {side.value}")
    b = LPBuilder()
    lo, hi = (0.0, np.inf) if side is Side.SUPPLY else (-np.inf, 0.0)
    w = b.add_vars(len(cands), lb=lo, ub=hi, name="w")
    terms = _RevenueTerms(T)
    _candidate_terms(terms, b, window, node, side, cands, w, formulation)
    r = b.add_vars(T, lb=-np.inf, obj=1.0 / T, name="r")
    terms.rows_for(b, r)
    b.add_row(w, side.sign, LE, 1.0)
    z, tau = _es_block(b, r, K, config.rho_tilde)
    segs = [SegmentVars(str(node), side, int(c), float(p)) for c, p in zip(w, cands.prices)]
    vm = VariableMap(SAMPLE_P, window.target_hour, segs, r, z, tau, K, config.rho_tilde)
    return BuiltModel(b.build(maximize=True), vm)


def _strict_gap(lam) -> float:
    u = np.unique(lam)
    return 0.5 * float(np.min(np.diff(u))) if u.size > 1 else 1.0


def _price_indicator_rows(b, p, u, lam, side, lo, hi, eps):
    """Big-M rows making binary ``u_t`` equal to the clearing indicator of price ``p``."""
    order = np.argsort(lam, kind="stable")
    for t in range(lam.shape[0]):
        lt = lam[t]
        if side is Side.SUPPLY:
            if lt < hi:  # u=1 -> p <= lam_t
                b.add_row([p, u[t]], [1.0, hi - lt], LE, hi)
            if lt + eps > lo:  # u=0 -> p >= lam_t + eps
                b.add_row([p, u[t]], [1.0, lt + eps - lo], GE, lt + eps)
        else:
            if lt > lo:  # u=1 -> p >= lam_t
                b.add_row([p, u[t]], [1.0, -(lt - lo)], GE, lo)
            if lt - eps < hi:  # u=0 -> p <= lam_t - eps
                b.add_row([p, u[t]], [1.0, -(hi - lt + eps)], LE, lt - eps)
    # clearing sets are nested in the price ordering
    for a, c in zip(order[:-1], order[1:]):
        if lam[a] == lam[c]:
            b.add_row([u[a], u[c]], [1.0, -1.0], EQ, 0.0)
        elif side is Side.SUPPLY:
            b.add_row([u[a], u[c]], [1.0, -1.0], LE, 0.0)
        else:
            b.add_row([u[a], u[c]], [1.0, -1.0], GE, 0.0)


def build_sample_p_milp(window: TrainingWindow, node, side, config: ModelConfig) -> BuiltModel:
    """Single-price, unit-volume model with one clearing binary per sample.

    The price is continuous between the smallest and largest candidate;
    the strict side of each clearing test uses a margin of half the
    smallest gap between distinct training prices.
    """
    side = Side(side)
    T = window.T
    K = _tail_count(config.alpha, T, config.rho_tilde)
    cands = candidate_prices(window, node, side, config.price_bounds(side))
    if len(cands) == 0:
        raise NoModelError(f"no candidate prices for {node} {side.value}")
    if T > config.milp_max_binaries:
        raise ModelTooLargeError(f"{T} binaries exceed limit {config.milp_max_binaries}")
    lam = window.da_of(node)
    delta = window.delta_of(node)
    lo, hi = float(cands.prices[0]), float(cands.prices[-1])
    b = LPBuilder()
    p = int(b.add_vars(1, lb=lo, ub=hi, name="p")[0])
    u = b.add_vars(T, lb=0.0, ub=1.0, name="u")
    r = b.add_vars(T, lb=-np.inf, obj=1.0 / T, name="r")
    _price_indicator_rows(b, p, u, lam, side, lo, hi, _strict_gap(lam))
    for t in range(T):
        b.add_row([r[t], u[t]], [1.0, -side.sign * delta[t]], EQ, 0.0)
    z, tau = _es_block(b, r, K, config.rho_tilde)
    seg = SegmentVars(str(node), side, price_col=p, fixed_volume=side.sign, snap=cands.prices)
    vm = VariableMap(SAMPLE_P_MILP, window.target_hour, [seg], r, z, tau, K, config.rho_tilde)
    return BuiltModel(MixedIntegerProgram(b.build(maximize=True), u), vm)


def build_sample_vp_milp(window: TrainingWindow, positions, config: ModelConfig,
                         segments: int | None = None) -> BuiltModel:
    """Explicit-price volume-price MILP with big-M clearing indicators.

    ``segments`` is the number of bid segments per position; ``None``
    means ``config.max_segments``, and a negative value means "one per
    candidate price" (the size at which the candidate-column LP is exact).
    Meant for tiny instances only.
    """
    positions = _positions(positions)
    T = window.T
    rho = config.total_volume * config.rho_tilde
    K = _tail_count(config.alpha, T, rho)
    cap = min(config.per_position_cap, config.total_volume)
    plan = []
    nbin = 0
    for node, side in positions:
        cands = candidate_prices(window, node, side, config.price_bounds(side))
        if len(cands) == 0:
            continue
        S = config.max_segments if segments is None else segments
        S = len(cands) if S < 0 else S
        plan.append((node, side, cands, S))
        nbin += S * T
    if not plan:
        raise NoModelError("every position has an empty candidate price set")
    if nbin > config.milp_max_binaries:
        raise ModelTooLargeError(f"{nbin} binaries exceed limit {config.milp_max_binaries}")

    b = LPBuilder()
    segs, groups, ints, cleared = [], [], [], []
    for node, side, cands, S in plan:
        lam = window.da_of(node)
        delta = window.delta_of(node)
        lo, hi = float(cands.prices[0]), float(cands.prices[-1])
        eps = _strict_gap(lam)
        wlo, whi = _bounds(side, cap)
        wcols, pcols = [], []
        for s in range(S):
            p = int(b.add_vars(1, lb=lo, ub=hi, name=f"p[{node},{side.value},{s}]")[0])
            w = int(b.add_vars(1, lb=wlo, ub=whi, name=f"w[{node},{side.value},{s}]")[0])
            u = b.add_vars(T, lb=0.0, ub=1.0, name=f"u[{node},{side.value},{s}]")
            v = b.add_vars(T, lb=wlo, ub=whi, name=f"v[{node},{side.value},{s}]")
            _price_indicator_rows(b, p, u, lam, side, lo, hi, eps)
            for t in range(T):
                if side is Side.SUPPLY:
                    b.add_row([v[t], w], [1.0, -1.0], LE, 0.0)
                    b.add_row([v[t], u[t]], [1.0, -cap], LE, 0.0)
                    b.add_row([v[t], w, u[t]], [1.0, -1.0, -cap], GE, -cap)
                else:
                    b.add_row([v[t], w], [1.0, -1.0], GE, 0.0)
                    b.add_row([v[t], u[t]], [1.0, cap], GE, 0.0)
                    b.add_row([v[t], w, u[t]], [1.0, -1.0, cap], LE, cap)
            ints.append(u)
            cleared.append((v, delta))
            wcols.append(w)
            pcols.append(p)
            segs.append(SegmentVars(node, side, weight_col=w, price_col=p, snap=cands.prices))
        for a, c in zip(pcols[:-1], pcols[1:]):
            b.add_row([a, c], [1.0, -1.0], LE, 0.0)
        if wcols:
            groups.append((side, np.array(wcols, dtype=np.int64)))
    r = b.add_vars(T, lb=-np.inf, obj=1.0 / T, name="r")
    for t in range(T):
        cols = [r[t]] + [v[t] for v, _ in cleared]
        vals = [1.0] + [-d[t] for _, d in cleared]
        b.add_row(cols, vals, EQ, 0.0)
    _volume_rows(b, groups, config)
    z, tau = _es_block(b, r, K, rho)
    vm = VariableMap(SAMPLE_VP_MILP, window.target_hour, segs, r, z, tau, K, rho)
    ints = np.concatenate(ints) if ints else np.zeros(0, np.int64)
    return BuiltModel(MixedIntegerProgram(b.build(maximize=True), ints), vm)


def trim_idle_volume(model: BuiltModel, solution: Solution, config: ModelConfig,
                     slack: float = 1e-9) -> Solution:
    """Among optimal solutions of an LP model, pick one with the least attempted volume.

    Optimal faces can hold volume that earns nothing in-sample (e.g. a supply
    and a demand bid at one node cancelling exactly).  A second LP keeps the
    objective within ``slack`` (relative) of the optimum and minimizes the
    L1 volume.  The original solution is returned if the second solve fails.
    """
    if model.is_mip or not solution.ok:
        return solution
    lp = model.program
    segs = [s for s in model.varmap.segments if s.weight_col is not None]
    cols = np.array([s.weight_col for s in segs], dtype=np.int64)
    if cols.size == 0 or not np.any(np.abs(solution.primal[cols]) > config.extraction_eps):
        return solution
    c = np.zeros(lp.num_vars)
    c[cols] = [-s.side.sign for s in segs]
    floor = solution.objective_value - slack * (1.0 + abs(solution.objective_value))
    second = LinearProgram(
        c, sp.vstack([lp.A, sp.csr_matrix(lp.c[None, :])]).tocsr(),
        np.append(lp.sense, GE), np.append(lp.rhs, floor), lp.lb, lp.ub, maximize=True,
        var_names=lp.var_names)
    sol = solve_lp(second, tol=config.tol, backend=config.lp_backend)
    if not sol.ok:
        return solution
    return Solution(sol.status, lp.objective(sol.primal), sol.primal, solution.iterations + sol.iterations,
                    message=sol.message)


def solve_model(model: BuiltModel, config: ModelConfig) -> Solution:
    if model.is_mip:
        return solve_milp(model.program, tol=config.tol, backend=config.milp_backend)
    return solve_lp(model.program, tol=config.tol, backend=config.lp_backend)


def score_positions(window: TrainingWindow, nodes, config: ModelConfig):
    """Rank every (node, side) by its sample-P LP optimum, best first.

    Positions that cannot be modelled score ``-inf`` and sort last; ties
    go to the smaller node id, then supply before demand.
    """
    scored = []
    for node in nodes:
        for side in SIDES:
            try:
                sol = solve_model(build_sample_p_lp(window, node, side, config), config)
                obj = sol.objective_value if sol.ok else -np.inf
            except NoModelError:
                obj = -np.inf
            scored.append((str(node), side, float(obj)))
    order = {Side.SUPPLY: 0, Side.DEMAND: 1}
    scored.sort(key=lambda e: (-e[2], e[0], order[e[1]]))
    return scored
