"""Report and statistics-table files.

Every file carries the configuration digest: CSV files start with a
``# config_hash=<digest>`` comment line, JSON files hold a ``config_hash``
key.  Solve times live in their own file so that everything else is
identical across worker counts.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np
import pandas as pd

from ..bidmodels import ModelConfig
from ..errors import ConvBidError
from .engine import BacktestReport, BacktestSettings, HourlyOutcome
from .stats import (EXPECTED_SHORTFALL, MEAN, bid_statistics, revenue_statistics, subsample_ci,
                    volume_statistics)

OUTCOME_COLUMNS = ("target_hour", "model", "status", "attempted_supply", "attempted_demand",
                   "attempted_volume", "cleared_supply", "cleared_demand", "cleared_volume",
                   "revenue", "normalized_revenue", "objective", "reason")


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _write_csv(path, digest, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={digest}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv_table(path) -> tuple[str, list[dict]]:
    """Return ``(config_hash, rows)`` of a file written by this module."""
    with open(path, newline="") as fh:
        first = fh.readline()
        digest = first.strip().split("=", 1)[1] if first.startswith("# config_hash=") else ""
        if not first.startswith("#"):
            fh.seek(0)
        return digest, list(csv.DictReader(fh))


def _slug(model):
    return model.lower().replace(" ", "_")


def write_report(report: BacktestReport, directory) -> dict[str, Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    js = d / f"report_{_slug(report.model)}.json"
    doc = {
        "config_hash": report.config_hash, "model": report.model, "tz": report.tz,
        "config": report.config.to_dict(), "settings": report.settings.to_dict(),
        "outcomes": [o.to_dict() for o in report.outcomes],
    }
    with open(js, "w") as fh:
        json.dump(doc, fh, indent=1, default=_json_default)
    cs = d / f"report_{_slug(report.model)}.csv"
    rows = [(str(o.target_hour), o.model, o.status, o.attempted_supply, o.attempted_demand,
             o.attempted_volume, o.cleared_supply, o.cleared_demand, o.cleared_volume, o.revenue,
             o.normalized_revenue, o.objective, o.reason) for o in report.outcomes]
    _write_csv(cs, report.config_hash, OUTCOME_COLUMNS, rows)
    return {"json": js, "csv": cs}


def _json_default(o):
    if isinstance(o, tuple):
        return list(o)
    return str(o)


def _config_from_dict(d: dict) -> ModelConfig:
    d = dict(d)
    for k in ("net_volume_bounds", "supply_price_bounds", "demand_price_bounds", "min_segment_distance"):
        if k in d:
            d[k] = tuple(float(x) for x in d[k])
    return ModelConfig(**d)


def read_report(path) -> BacktestReport:
    with open(path) as fh:
        doc = json.load(fh)
    try:
        s = doc["settings"]
        settings = BacktestSettings(s["lookback_days"], s["n_positions"], s["n_max_positions"],
                                    None if s["nodes"] is None else tuple(s["nodes"]))
        outs = tuple(HourlyOutcome.from_dict(o) for o in doc["outcomes"])
        return BacktestReport(doc["model"], _config_from_dict(doc["config"]), settings, outs,
                              doc["config_hash"], doc.get("tz", "UTC"))
    except (KeyError, TypeError) as exc:
        raise ConvBidError(f"{path}: not a backtest report ({exc})") from None


def _nan_safe(fn, *args):
    try:
        return fn(*args)
    except (ConvBidError, ValueError):
        return None


def write_tables(reports, directory, alpha=0.05, block_length=None, confidence=0.95,
                 stride=24) -> dict[str, Path]:
    """Revenue, volume, bid and interval tables over several reports (one row per model).

    ``block_length`` defaults to two years of hours, shrunk to half the
    series when the run is shorter.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("no reports")
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    digest = reports[0].config_hash
    paths = {}

    rows = []
    for rep in reports:
        s = revenue_statistics(rep, alpha)
        rows.append((rep.model, s["expected_value"], s["expected_shortfall"], s["expected_windfall"]))
    paths["table1"] = d / "table1_revenue.csv"
    _write_csv(paths["table1"], digest,
               ("model", "expected_value", "expected_shortfall", "expected_windfall"), rows)

    keys = ("attempted_mean", "attempted_supply_pct", "attempted_demand_pct",
            "cleared_mean", "cleared_supply_pct", "cleared_demand_pct")
    rows = [(rep.model, *(volume_statistics(rep)[k] for k in keys)) for rep in reports]
    paths["table3"] = d / "table3_volume.csv"
    _write_csv(paths["table3"], digest, ("model",) + keys, rows)

    keys = ("single_position_pct", "double_position_pct", "max_segments",
            "one_step_pct", "two_step_pct", "more_step_pct")
    rows = [(rep.model, *(bid_statistics(rep)[k] for k in keys)) for rep in reports]
    paths["table4"] = d / "table4_bids.csv"
    _write_csv(paths["table4"], digest, ("model",) + keys, rows)

    rows = []
    for rep in reports:
        x = rep.normalized_revenues
        L = block_length if block_length is not None else min(2 * 8760, max(1, x.size // 2))
        for stat, point in ((MEAN, float(x.mean())),
                            (EXPECTED_SHORTFALL, revenue_statistics(rep, alpha)["expected_shortfall"])):
            ci = _nan_safe(subsample_ci, x, stat, L, confidence, alpha, stride)
            lo, hi = ci if ci is not None else (float("nan"), float("nan"))
            rows.append((rep.model, stat, point, lo, hi, L, confidence, stride))
    paths["ci"] = d / "ci_table.csv"
    _write_csv(paths["ci"], digest, ("model", "statistic", "point", "lower", "upper",
                                     "block_length", "confidence", "stride"), rows)

    rows = []
    for rep in reports:
        hours = np.array([o.target_hour for o in rep.outcomes], dtype="datetime64[h]")
        local = (pd.DatetimeIndex(hours.astype("datetime64[ns]")).tz_localize("UTC")
                 .tz_convert(rep.tz).tz_localize(None).normalize())
        cleared = pd.Series([o.cleared_volume for o in rep.outcomes], index=local)
        for day, vol in cleared.groupby(level=0, sort=True).sum().items():
            rows.append((day.date().isoformat(), rep.model, float(vol)))
    paths["daily"] = d / "daily_cleared_volume.csv"
    _write_csv(paths["daily"], digest, ("date", "model", "cleared_volume"), rows)
    return paths


def write_solve_times(reports, path) -> Path:
    rows = []
    for rep in reports:
        t = np.array([o.solve_time for o in rep.outcomes])
        rows.append((rep.model, float(t.mean()), float(t.std(ddof=1)) if t.size > 1 else 0.0, t.size))
    digest = reports[0].config_hash if reports else ""
    _write_csv(path, digest, ("model", "mean_seconds", "std_seconds", "hours"), rows)
    return Path(path)
