"""Historical LMP ingestion, rolling training windows and node clustering."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import cached_property

import numpy as np
import pandas as pd

from .errors import (CoverageError, DuplicateRecordError, ParseError, UnknownNodeError,
                     ValidationError)

DEFAULT_SCHEMA = {"node": "node", "timestamp": "timestamp", "da_lmp": "da_lmp", "rt_lmp": "rt_lmp"}
PANEL_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PriceRecord:
    node: str
    timestamp: np.datetime64
    da_lmp: float
    rt_lmp: float


@dataclass(frozen=True, eq=False)
class PricePanel:
    """Node x hour matrices of day-ahead, real-time and delta prices.

    ``hours`` is a contiguous hourly UTC grid; cells without data are NaN.
    ``tz`` is the market timezone used for the "same hour of day" notion.
    """

    nodes: tuple[str, ...]
    hours: np.ndarray
    da: np.ndarray
    rt: np.ndarray
    tz: str = "UTC"
    delta: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "hours", np.asarray(self.hours, dtype="datetime64[h]"))
        shape = (len(self.nodes), self.hours.shape[0])
        da = np.asarray(self.da, dtype=float).reshape(shape)
        rt = np.asarray(self.rt, dtype=float).reshape(shape)
        for arr in (da, rt):
            arr.setflags(write=False)
        object.__setattr__(self, "da", da)
        object.__setattr__(self, "rt", rt)
        delta = da - rt
        delta.setflags(write=False)
        object.__setattr__(self, "delta", delta)
        if self.hours.size > 1 and np.any(np.diff(self.hours).astype(np.int64) != 1):
            raise ValidationError("panel hours must be a contiguous hourly grid")

    @property
    def num_nodes(self):
        return len(self.nodes)

    @property
    def num_hours(self):
        return self.hours.shape[0]

    @cached_property
    def missing(self) -> np.ndarray:
        return ~(np.isfinite(self.da) & np.isfinite(self.rt))

    @cached_property
    def node_index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.nodes)}

    @cached_property
    def _local(self):
        idx = pd.DatetimeIndex(self.hours.astype("datetime64[ns]")).tz_localize("UTC")
        local = idx.tz_convert(self.tz)
        dates = local.tz_localize(None).normalize().values.astype("datetime64[D]")
        return dates, np.asarray(local.hour, dtype=np.int64)

    @cached_property
    def _slot(self) -> dict[tuple[np.datetime64, int], int]:
        dates, hod = self._local
        slot = {}
        for k in range(self.num_hours):
            slot.setdefault((dates[k], int(hod[k])), k)
        return slot

    def local_time(self, hour) -> tuple[np.datetime64, int]:
        """Market-local calendar date and hour-of-day of a UTC instant."""
        ts = pd.Timestamp(np.datetime64(hour, "h")).tz_localize("UTC").tz_convert(self.tz)
        return np.datetime64(ts.date(), "D"), int(ts.hour)

    def column(self, hour) -> int:
        h = np.datetime64(hour, "h")
        if self.num_hours == 0:
            raise CoverageError(f"hour {h} outside panel", [h])
        k = int((h - self.hours[0]).astype(np.int64))
        if k < 0 or k >= self.num_hours:
            raise CoverageError(f"hour {h} outside panel", [h])
        return k

    def realized(self, hour, nodes=None) -> tuple[dict[str, float], dict[str, float]]:
        """Day-ahead price and delta per node at one hour (finite cells only)."""
        k = self.column(hour)
        sel = self.nodes if nodes is None else nodes
        da, delta = {}, {}
        for n in sel:
            i = self._index(n)
            if np.isfinite(self.da[i, k]) and np.isfinite(self.rt[i, k]):
                da[n] = float(self.da[i, k])
                delta[n] = float(self.delta[i, k])
        return da, delta

    def _index(self, node) -> int:
        try:
            return self.node_index[node]
        except KeyError:
            raise UnknownNodeError(f"unknown node {node!r}") from None


@dataclass(frozen=True, eq=False)
class TrainingWindow:
    """``T`` same-hour-of-day samples preceding the target day.

    ``delta`` and ``da`` have shape (T, N) with columns ordered as ``nodes``;
    rows are in chronological order.
    """

    nodes: tuple[str, ...]
    timestamps: np.ndarray
    delta: np.ndarray
    da: np.ndarray
    target_hour: np.datetime64
    hour_of_day: int

    @classmethod
    def from_arrays(cls, delta, da, nodes=None, target_hour="2000-01-01T00"):
        """Window over synthetic samples; 1-D inputs mean a single node."""
        delta = np.asarray(delta, dtype=float)
        da = np.asarray(da, dtype=float)
        if delta.ndim == 1:
            delta, da = delta[:, None], da[:, None]
        if delta.shape != da.shape:
            raise ValueError("delta and da must have the same shape")
        T, N = delta.shape
        nodes = tuple(str(n) for n in (nodes if nodes is not None else [f"n{i}" for i in range(N)]))
        target = np.datetime64(target_hour, "h")
        stamps = target - np.arange(T, 0, -1) * np.timedelta64(24, "h")
        hod = int((target - target.astype("datetime64[D]")).astype(int))
        return cls(nodes, stamps, delta, da, target, hod)

    @property
    def T(self) -> int:
        return self.delta.shape[0]

    @cached_property
    def _pos(self):
        return {n: i for i, n in enumerate(self.nodes)}

    def column(self, node) -> int:
        try:
            return self._pos[node]
        except KeyError:
            raise UnknownNodeError(f"node {node!r} not in window") from None

    def delta_of(self, node) -> np.ndarray:
        return self.delta[:, self.column(node)]

    def da_of(self, node) -> np.ndarray:
        return self.da[:, self.column(node)]


@dataclass(frozen=True)
class NodeClustering:
    representative: dict[str, str]
    threshold: float

    def representatives(self) -> list[str]:
        return sorted(set(self.representative.values()))


def _parse_time(text: str) -> np.datetime64:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    if dt.minute or dt.second or dt.microsecond:
        raise ValueError(f"timestamp {text!r} is not on an hour boundary")
    return np.datetime64(dt, "h")


def load_price_csv(path, schema: dict[str, str] | None = None, tz: str = "UTC") -> PricePanel:
    """Read ``node, timestamp, da_lmp, rt_lmp`` rows into a :class:`PricePanel`.

    ``schema`` maps the logical column names to the header names used in the
    file.  Timestamps without an offset are taken as UTC.
    """
    cols = dict(DEFAULT_SCHEMA)
    cols.update(schema or {})
    records: dict[tuple[str, np.datetime64], tuple[float, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing_cols = [v for v in cols.values() if v not in header]
        if header and missing_cols:
            raise ParseError(f"missing columns {missing_cols}", line=1)
        for row in reader:
            line = reader.line_num
            try:
                node = row[cols["node"]].strip()
                ts = _parse_time(row[cols["timestamp"]])
                da = float(row[cols["da_lmp"]])
                rt = float(row[cols["rt_lmp"]])
            except (TypeError, ValueError, AttributeError) as exc:
                raise ParseError(f"malformed row: {exc}", line=line) from None
            if not node:
                raise ParseError("empty node identifier", line=line)
            if not (np.isfinite(da) and np.isfinite(rt)):
                raise ValidationError("non-finite price", line=line)
            key = (node, ts)
            if key in records:
                raise DuplicateRecordError(f"duplicate record for node {node!r} at {ts}", line=line)
            records[key] = (da, rt)
    return panel_from_records(records, tz=tz)


def panel_from_records(records, tz: str = "UTC") -> PricePanel:
    """Build a panel from ``{(node, hour): (da, rt)}``."""
    if not records:
        return PricePanel((), np.zeros(0, "datetime64[h]"), np.zeros((0, 0)), np.zeros((0, 0)), tz)
    nodes = sorted({k[0] for k in records})
    stamps = np.array([k[1] for k in records], dtype="datetime64[h]")
    start, end = stamps.min(), stamps.max()
    hours = np.arange(start, end + np.timedelta64(1, "h"), dtype="datetime64[h]")
    da = np.full((len(nodes), hours.size), np.nan)
    rt = np.full_like(da, np.nan)
    pos = {n: i for i, n in enumerate(nodes)}
    for (node, ts), (d, r) in records.items():
        k = int((ts - start).astype(np.int64))
        da[pos[node], k] = d
        rt[pos[node], k] = r
    return PricePanel(tuple(nodes), hours, da, rt, tz)


def save_panel(panel: PricePanel, path) -> None:
    """Persist a panel as ``.npz`` with a schema-version field."""
    np.savez_compressed(
        path,
        schema_version=np.array(PANEL_SCHEMA_VERSION),
        nodes=np.array(panel.nodes, dtype=str),
        hours=panel.hours.astype(np.int64),
        da=panel.da,
        rt=panel.rt,
        tz=np.array(panel.tz),
    )


def load_panel(path) -> PricePanel:
    with np.load(path, allow_pickle=False) as z:
        version = int(z["schema_version"])
        if version != PANEL_SCHEMA_VERSION:
            raise ValidationError(f"unsupported panel cache schema version {version}")
        return PricePanel(tuple(z["nodes"].tolist()), z["hours"].astype("datetime64[h]"),
                          z["da"], z["rt"], str(z["tz"]))


def rolling_window(panel: PricePanel, target_hour, lookback_days: int,
                   nodes=None) -> TrainingWindow:
    """Same-hour-of-day samples from the ``lookback_days`` days before the target day."""
    if lookback_days < 1:
        raise ValueError("lookback_days must be positive")
    nodes = tuple(panel.nodes if nodes is None else nodes)
    rows = np.array([panel._index(n) for n in nodes], dtype=np.int64)
    target = np.datetime64(target_hour, "h")
    day, hod = panel.local_time(target)
    days = day - np.arange(lookback_days, 0, -1)
    cols, missing = [], []
    for d in days:
        k = panel._slot.get((d, hod))
        if k is None or (rows.size and panel.missing[rows, k].any()):
            missing.append(d)
        else:
            cols.append(k)
    if missing:
        shown = ", ".join(str(d) for d in missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise CoverageError(
            f"insufficient history for {target}: {len(missing)} missing day(s): {shown}{more}",
            missing)
    cols = np.array(cols, dtype=np.int64)
    delta = panel.delta[np.ix_(rows, cols)].T.copy()
    da = panel.da[np.ix_(rows, cols)].T.copy()
    return TrainingWindow(nodes, panel.hours[cols], delta, da, target, hod)


def event_matrix(panel: PricePanel, event_quantile: float = 0.95) -> np.ndarray:
    """Boolean (N, H): hours where |delta| exceeds the node's own quantile."""
    mag = np.abs(panel.delta)
    if mag.size == 0:
        return np.zeros(mag.shape, dtype=bool)
    with np.errstate(invalid="ignore"):
        q = np.nanquantile(np.where(np.isfinite(mag), mag, np.nan), event_quantile, axis=1)
        ev = mag > q[:, None]
    return ev & np.isfinite(mag)


def event_sync_scores(panel: PricePanel, event_quantile: float = 0.95) -> np.ndarray:
    """Pairwise ``|Ea & Eb| / sqrt(|Ea| |Eb|)`` with exact-hour coincidence."""
    ev = event_matrix(panel, event_quantile).astype(np.float64)
    counts = ev.sum(axis=1)
    inter = ev @ ev.T
    denom = np.sqrt(np.outer(counts, counts))
    with np.errstate(invalid="ignore", divide="ignore"):
        score = np.where(denom > 0, inter / np.where(denom > 0, denom, 1.0), 0.0)
    return score


def cluster_nodes(panel: PricePanel, threshold: float = 0.98,
                  event_quantile: float = 0.95) -> NodeClustering:
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    if not 0.0 < event_quantile < 1.0:
        raise ValueError("event_quantile must lie in (0, 1)")
    n = panel.num_nodes
    if n == 0:
        return NodeClustering({}, threshold)
    score = event_sync_scores(panel, event_quantile)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    ii, jj = np.nonzero(np.triu(score >= threshold, k=1))
    for i, j in zip(ii.tolist(), jj.tolist()):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[str]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(panel.nodes[i])
    rep = {}
    for members in groups.values():
        head = min(members)
        for m in members:
            rep[m] = head
    return NodeClustering(dict(sorted(rep.items())), threshold)


def write_clustering_csv(clustering: NodeClustering, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "representative"])
        for node, rep in clustering.representative.items():
            w.writerow([node, rep])
