"""Rolling-window backtest driver.

Every target hour is an independent unit of work: build the training
window, rank positions with the sample-P LP, build the requested bid
recipes, apply market rules, then clear and settle against the realized
prices of that hour.
"""
from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..bidmodels import (SAMPLE_P, SAMPLE_V, SAMPLE_VP, SIDES, BidSet, ModelConfig, Side,
                         build_sample_p_lp, build_sample_v, build_sample_vp, enforce_market_rules,
                         extract_bids, solve_model, trim_idle_volume)
from ..bidmodels.bids import bidset_from_dict, bidset_to_dict
from ..errors import ConvBidError, CoverageError, NoModelError
from ..market_data import PricePanel, rolling_window
from .clearing import clear_bids, settle

SAMPLE_P_MAX = "sample-P-max"
MODEL_KINDS = (SAMPLE_VP, SAMPLE_V, SAMPLE_P, SAMPLE_P_MAX)


class SolveFailure(ConvBidError):
    pass


@dataclass(frozen=True)
class BacktestSettings:
    """Protocol knobs that are not part of the bid model itself.

    ``n_positions`` supply and as many demand positions feed sample-P,
    sample-VP and sample-V; sample-P-max uses the top ``n_max_positions``
    per side at the per-position cap.
    """

    lookback_days: int = 365
    n_positions: int = 100
    n_max_positions: int = 10
    nodes: tuple[str, ...] | None = None

    def to_dict(self):
        return {"lookback_days": self.lookback_days, "n_positions": self.n_positions,
                "n_max_positions": self.n_max_positions,
                "nodes": None if self.nodes is None else list(self.nodes)}


@dataclass(frozen=True, eq=False)
class HourlyOutcome:
    target_hour: np.datetime64
    model: str
    attempted_supply: float
    attempted_demand: float
    cleared_supply: float
    cleared_demand: float
    revenue: float
    normalized_revenue: float
    bids: BidSet
    objective: float = float("nan")
    status: str = "ok"
    reason: str = ""
    solve_time: float = field(default=0.0, compare=False)

    @property
    def attempted_volume(self) -> float:
        return self.attempted_supply + self.attempted_demand

    @property
    def cleared_volume(self) -> float:
        return self.cleared_supply + self.cleared_demand

    def to_dict(self, with_timing=False) -> dict:
        d = {
            "target_hour": str(self.target_hour), "model": self.model,
            "attempted_supply": self.attempted_supply, "attempted_demand": self.attempted_demand,
            "cleared_supply": self.cleared_supply, "cleared_demand": self.cleared_demand,
            "revenue": self.revenue, "normalized_revenue": self.normalized_revenue,
            "objective": None if np.isnan(self.objective) else self.objective,
            "status": self.status, "reason": self.reason, "bids": bidset_to_dict(self.bids),
        }
        if with_timing:
            d["solve_time"] = self.solve_time
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "HourlyOutcome":
        obj = d.get("objective")
        return cls(np.datetime64(d["target_hour"], "h"), d["model"], d["attempted_supply"],
                   d["attempted_demand"], d["cleared_supply"], d["cleared_demand"], d["revenue"],
                   d["normalized_revenue"], bidset_from_dict(d["bids"]),
                   float("nan") if obj is None else obj, d["status"], d["reason"],
                   d.get("solve_time", 0.0))


@dataclass(frozen=True, eq=False)
class BacktestReport:
    model: str
    config: ModelConfig
    settings: BacktestSettings
    outcomes: tuple[HourlyOutcome, ...]
    config_hash: str = ""
    tz: str = "UTC"

    def __len__(self):
        return len(self.outcomes)

    @property
    def normalized_revenues(self) -> np.ndarray:
        return np.array([o.normalized_revenue for o in self.outcomes])

    @property
    def revenues(self) -> np.ndarray:
        return np.array([o.revenue for o in self.outcomes])

    @property
    def failures(self) -> list[HourlyOutcome]:
        return [o for o in self.outcomes if o.status != "ok"]


def config_hash(*parts) -> str:
    """Short stable digest of JSON-serializable parts."""
    blob = json.dumps(parts, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def panel_fingerprint(panel: PricePanel) -> str:
    h = hashlib.sha256()
    h.update("\n".join(panel.nodes).encode())
    h.update(panel.hours.astype(np.int64).tobytes())
    h.update(np.ascontiguousarray(panel.da).tobytes())
    h.update(np.ascontiguousarray(panel.rt).tobytes())
    h.update(panel.tz.encode())
    return h.hexdigest()[:16]


# ----------------------------------------------------------------- recipes

def score_all(window, nodes, config):
    """Sample-P LP for every (node, side): ``{key: (objective, solution, varmap)}``."""
    out = {}
    for node in nodes:
        for side in SIDES:
            try:
                model = build_sample_p_lp(window, node, side, config)
            except NoModelError:
                out[(node, side)] = (-np.inf, None, None)
                continue
            sol = solve_model(model, config)
            obj = sol.objective_value if sol.ok else -np.inf
            out[(node, side)] = (float(obj), sol if sol.ok else None, model.varmap)
    return out


def _top(scores, side, n):
    keys = [k for k in scores if k[1] is side and np.isfinite(scores[k][0])]
    keys.sort(key=lambda k: (-scores[k][0], k[0]))
    return keys[:n]


def _merge(hour, parts) -> BidSet:
    curves = {}
    for bs in parts:
        curves.update(bs.curves)
    return BidSet(hour, curves)


def _p_recipe(hour, scores, keys, scale, config):
    parts, obj = [], 0.0
    for k in keys:
        val, sol, vm = scores[k]
        parts.append(extract_bids(sol, vm, config, volume_scale=scale))
        obj += val * scale
    return _merge(hour, parts), obj


def _joint_recipe(builder, window, keys, config):
    if not keys:
        return BidSet(window.target_hour), 0.0
    model = builder(window, keys, config)
    sol = solve_model(model, config)
    if not sol.ok:
        raise SolveFailure(f"{model.varmap.kind}: {sol.status.value} {sol.message}".strip())
    sol = trim_idle_volume(model, sol, config)
    return extract_bids(sol, model.varmap, config), sol.objective_value


def recipe_bids(kind, window, scores, config, settings):
    """Bids of one recipe before market rules, and the in-sample objective."""
    hour = window.target_hour
    n, nmax = settings.n_positions, settings.n_max_positions
    if kind == SAMPLE_P:
        keys = _top(scores, Side.SUPPLY, n) + _top(scores, Side.DEMAND, n)
        return _p_recipe(hour, scores, keys, config.total_volume / (2 * n), config)
    if kind == SAMPLE_P_MAX:
        keys = _top(scores, Side.SUPPLY, nmax) + _top(scores, Side.DEMAND, nmax)
        return _p_recipe(hour, scores, keys, config.per_position_cap, config)
    keys = _top(scores, Side.SUPPLY, n) + _top(scores, Side.DEMAND, n)
    if kind == SAMPLE_VP:
        return _joint_recipe(build_sample_vp, window, keys, config)
    if kind == SAMPLE_V:
        return _joint_recipe(build_sample_v, window, keys, config)
    raise ValueError(f"unknown model kind {kind!r}; choose from {MODEL_KINDS}")


def optimize_hour(panel: PricePanel, hour, kind, config: ModelConfig,
                  settings: BacktestSettings = BacktestSettings()):
    """Submitted bids for one target hour (no settlement): ``(bids, objective, window)``."""
    nodes = settings.nodes if settings.nodes is not None else panel.nodes
    window = rolling_window(panel, hour, settings.lookback_days, nodes)
    scores = score_all(window, nodes, config)
    bids, obj = recipe_bids(kind, window, scores, config, settings)
    bids = enforce_market_rules(bids, config.min_segment_volume, config.max_segments,
                                config.min_segment_distance)
    return bids, obj, window


def _outcome(kind, hour, bids, objective, da_star, delta_star, config, elapsed):
    cleared = clear_bids(bids, da_star)
    revenue = settle(cleared, delta_star)
    return HourlyOutcome(
        hour, kind,
        bids.volume(Side.SUPPLY), bids.volume(Side.DEMAND),
        cleared.volume(Side.SUPPLY), cleared.volume(Side.DEMAND),
        revenue, revenue / config.total_volume, bids, float(objective), solve_time=elapsed)


def _failed(kind, hour, reason, elapsed):
    return HourlyOutcome(hour, kind, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, BidSet(hour),
                         status="failed", reason=reason, solve_time=elapsed)


def simulate_hour(panel: PricePanel, hour, kinds, config: ModelConfig,
                  settings: BacktestSettings):
    """Outcomes of every model kind for one target hour, plus the training timestamps used."""
    hour = np.datetime64(hour, "h")
    nodes = settings.nodes if settings.nodes is not None else panel.nodes
    window = rolling_window(panel, hour, settings.lookback_days, nodes)
    da_star, delta_star = panel.realized(hour, nodes)
    t0 = time.perf_counter()
    try:
        scores = score_all(window, nodes, config)
        score_time = time.perf_counter() - t0
    except ConvBidError as exc:
        elapsed = time.perf_counter() - t0
        return {k: _failed(k, hour, f"scoring: {exc}", elapsed) for k in kinds}, window.timestamps
    out = {}
    for kind in kinds:
        t1 = time.perf_counter()
        try:
            bids, obj = recipe_bids(kind, window, scores, config, settings)
            bids = enforce_market_rules(bids, config.min_segment_volume, config.max_segments,
                                        config.min_segment_distance)
            elapsed = score_time + time.perf_counter() - t1
            out[kind] = _outcome(kind, hour, bids, obj, da_star, delta_star, config, elapsed)
        except ConvBidError as exc:
            out[kind] = _failed(kind, hour, str(exc), score_time + time.perf_counter() - t1)
    return out, window.timestamps


def validate_coverage(panel: PricePanel, hours, lookback_days: int, nodes=None) -> None:
    """Abort early, naming the first target hour whose history or realized prices are incomplete."""
    nodes = tuple(panel.nodes if nodes is None else nodes)
    rows = np.array([panel._index(n) for n in nodes], dtype=np.int64)
    for h in hours:
        try:
            rolling_window(panel, h, lookback_days, nodes)
            k = panel.column(h)
        except CoverageError as exc:
            raise CoverageError(f"first uncovered target hour {h}: {exc}", exc.missing) from None
        if rows.size and panel.missing[rows, k].any():
            raise CoverageError(f"first uncovered target hour {h}: realized prices missing", [h])


# ----------------------------------------------------------- orchestration

_WORKER = {}


def _init_worker(panel, kinds, config, settings):
    _WORKER.update(panel=panel, kinds=kinds, config=config, settings=settings)


def _work(hour):
    w = _WORKER
    return simulate_hour(w["panel"], hour, w["kinds"], w["config"], w["settings"])


def _checkpoint_path(directory, hour):
    return Path(directory) / f"{str(hour).replace(':', '')}.json"


def _load_checkpoint(directory, hour, digest, kinds):
    path = _checkpoint_path(directory, hour)
    if not path.exists():
        return None
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("config_hash") != digest:
        return None
    outs = {d["model"]: HourlyOutcome.from_dict(d) for d in doc["outcomes"]}
    if not all(k in outs for k in kinds):
        return None
    return {k: outs[k] for k in kinds}


def _save_checkpoint(directory, hour, digest, outcomes):
    path = _checkpoint_path(directory, hour)
    tmp = path.with_suffix(".tmp")
    doc = {"config_hash": digest, "target_hour": str(hour),
           "outcomes": [o.to_dict(with_timing=True) for o in outcomes.values()]}
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def hour_range(start, end) -> np.ndarray:
    """UTC hours in ``[start, end)``."""
    s, e = np.datetime64(start, "h"), np.datetime64(end, "h")
    return np.arange(s, e, np.timedelta64(1, "h"))


def run_backtests(panel: PricePanel, kinds, config: ModelConfig, hours,
                  settings: BacktestSettings = BacktestSettings(), workers: int = 1,
                  checkpoint_dir=None, resume: bool = False, audit=None,
                  progress=None) -> dict[str, BacktestReport]:
    """Run several recipes over the same hours, sharing the position ranking.

    ``audit(target_hour, training_timestamps)`` is called for every hour in
    chronological order.  With ``checkpoint_dir`` each finished hour is
    written to disk; ``resume=True`` reuses hours already there (only when
    the configuration digest matches).
    """
    kinds = tuple(kinds)
    for k in kinds:
        if k not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {k!r}; choose from {MODEL_KINDS}")
    hours = [np.datetime64(h, "h") for h in hours]
    if len(set(hours)) != len(hours) or hours != sorted(hours):
        raise ValueError("target hours must be strictly increasing")
    validate_coverage(panel, hours, settings.lookback_days, settings.nodes)
    digest = config_hash(config.to_dict(), settings.to_dict(), list(kinds), panel_fingerprint(panel))

    done = {}
    if checkpoint_dir is not None:
        Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
        if resume:
            for h in hours:
                got = _load_checkpoint(checkpoint_dir, h, digest, kinds)
                if got is not None:
                    done[h] = got
    todo = [h for h in hours if h not in done]

    def _record(h, result):
        outs, stamps = result
        if audit is not None:
            audit(h, stamps)
        if checkpoint_dir is not None:
            _save_checkpoint(checkpoint_dir, h, digest, outs)
        done[h] = outs
        if progress is not None:
            progress(h)

    if workers <= 1 or len(todo) <= 1:
        for h in todo:
            _record(h, simulate_hour(panel, h, kinds, config, settings))
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(panel, kinds, config, settings)) as ex:
            chunk = max(1, len(todo) // (4 * workers))
            for h, res in zip(todo, ex.map(_work, todo, chunksize=chunk)):
                _record(h, res)

    return {
        k: BacktestReport(k, config, settings, tuple(done[h][k] for h in hours), digest, panel.tz)
        for k in kinds
    }


def run_backtest(panel: PricePanel, kind: str, config: ModelConfig, hours,
                 settings: BacktestSettings = BacktestSettings(), **kwargs) -> BacktestReport:
    return run_backtests(panel, [kind], config, hours, settings, **kwargs)[kind]
