"""Bid curves: extraction from solved models, market rules, tiered form, file I/O."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ExtractionError, InvalidCurveError, ParseError
from ..solver import Solution
from .config import ModelConfig, Side
from .models import SAMPLE_V, VariableMap

BLOCK = "block"
TIERED = "tiered"
CSV_COLUMNS = ("target_hour", "node", "side", "segment_index", "price", "volume")


@dataclass(frozen=True)
class BidSegment:
    price: float
    volume: float

    def __post_init__(self):
        if not (math.isfinite(self.price) and math.isfinite(self.volume)):
            raise InvalidCurveError("segment price and volume must be finite")
        if self.volume == 0:
            raise InvalidCurveError("segment volume must be nonzero")

    @property
    def side(self) -> Side:
        return Side.SUPPLY if self.volume > 0 else Side.DEMAND


def _hour(h) -> np.datetime64:
    return np.datetime64(h, "h")


@dataclass(frozen=True, eq=False)
class BidSet:
    """All curves submitted for one target hour, keyed by ``(node, side)``.

    Curves are stored sorted by price; empty curves are dropped.
    """

    target_hour: np.datetime64
    curves: dict = field(default_factory=dict)
    interpretation: str = BLOCK

    def __post_init__(self):
        object.__setattr__(self, "target_hour", _hour(self.target_hour))
        clean = {}
        for (node, side), segs in sorted(self.curves.items(), key=lambda kv: (kv[0][0], Side(kv[0][1]) is Side.DEMAND)):
            side = Side(side)
            segs = tuple(sorted(segs, key=lambda s: s.price))
            for s in segs:
                if s.side is not side:
                    raise InvalidCurveError(f"{node}: {side.value} curve holds a {s.side.value} segment")
            if self.interpretation == BLOCK and len({s.price for s in segs}) != len(segs):
                raise InvalidCurveError(f"{node} {side.value}: duplicate block prices")
            if segs:
                clean[(str(node), side)] = segs
        object.__setattr__(self, "curves", clean)

    def curve(self, node, side) -> tuple[BidSegment, ...]:
        return self.curves.get((str(node), Side(side)), ())

    @property
    def nodes(self) -> list[str]:
        return sorted({n for n, _ in self.curves})

    def segments(self):
        """Yield ``(node, side, index, segment)`` in a stable order."""
        for (node, side), segs in self.curves.items():
            for i, s in enumerate(segs):
                yield node, side, i, s

    def volume(self, side=None) -> float:
        """Attempted L1 volume, optionally restricted to one side."""
        return float(sum(abs(s.volume) for _, sd, _, s in self.segments()
                         if side is None or sd is Side(side)))

    def __eq__(self, other):
        if not isinstance(other, BidSet):
            return NotImplemented
        return (self.target_hour == other.target_hour and self.curves == other.curves
                and self.interpretation == other.interpretation)

    def __len__(self):
        return sum(len(s) for s in self.curves.values())


def _snap(price, side, grid, tol=1e-6):
    """Map a continuous optimal price onto the candidate with the same training clear set."""
    if grid is None or len(grid) == 0:
        return float(price)
    if side is Side.SUPPLY:
        k = np.searchsorted(grid, price - tol, side="left")
        return float(grid[min(k, len(grid) - 1)])
    k = np.searchsorted(grid, price + tol, side="right") - 1
    return float(grid[max(k, 0)])


def extract_bids(solution: Solution, varmap: VariableMap, config: ModelConfig,
                 volume_scale: float = 1.0) -> BidSet:
    """Turn a solved model into block bid curves.

    Columns with ``|volume| <= extraction_eps`` are dropped.  Segments landing
    on the same price (possible after price snapping) are merged.  Volume-only
    solutions get the configured always-clear prices, and unless double
    positions are allowed, a node holding both sides is netted to one side
    (both legs always clear, so the payoff is unchanged).
    """
    if not solution.ok:
        raise ExtractionError(f"cannot extract bids from a {solution.status.value} solution")
    x = solution.primal
    acc: dict[tuple[str, Side], dict[float, float]] = {}
    for seg in varmap.segments:
        vol = x[seg.weight_col] if seg.weight_col is not None else seg.fixed_volume
        vol = float(vol) * volume_scale
        if abs(vol) <= config.extraction_eps:
            continue
        if seg.price_col is not None:
            price = _snap(x[seg.price_col], seg.side, seg.snap)
        elif seg.price is not None:
            price = seg.price
        else:
            price = config.v_supply_price if seg.side is Side.SUPPLY else config.v_demand_price
        # clip solver noise of the wrong sign
        vol = abs(vol) * seg.side.sign
        cur = acc.setdefault((seg.node, seg.side), {})
        cur[price] = cur.get(price, 0.0) + vol

    if varmap.kind == SAMPLE_V and not config.v_allow_double_positions:
        for node in {n for n, _ in acc}:
            sup, dem = (node, Side.SUPPLY), (node, Side.DEMAND)
            if sup in acc and dem in acc:
                net = sum(acc.pop(sup).values()) + sum(acc.pop(dem).values())
                if abs(net) > config.extraction_eps:
                    side = Side.SUPPLY if net > 0 else Side.DEMAND
                    price = config.v_supply_price if net > 0 else config.v_demand_price
                    acc[(node, side)] = {price: net}

    curves = {k: [BidSegment(p, v) for p, v in d.items()] for k, d in acc.items()}
    return BidSet(varmap.target_hour, curves)


def _without(segs, drop_idx):
    return segs[:drop_idx] + segs[drop_idx + 1:]


def _smallest(segs):
    # smallest |volume|; on ties the higher-priced segment goes first
    return min(range(len(segs)), key=lambda i: (abs(segs[i].volume), -segs[i].price))


def enforce_market_rules(bids: BidSet, min_volume: float = 1.0, max_segments: int = 10,
                         min_distance=(0.0, 0.0)) -> BidSet:
    """Apply submission rules curve by curve.

    Order: drop segments below ``min_volume``; then, while two adjacent
    same-side prices are closer than the side's minimum distance, drop the
    smaller of the pair; finally trim the smallest segments down to
    ``max_segments``.
    """
    if bids.interpretation != BLOCK:
        raise InvalidCurveError("market rules apply to block curves")
    if np.isscalar(min_distance):
        min_distance = (float(min_distance), float(min_distance))
    out = {}
    for (node, side), segs in bids.curves.items():
        segs = [s for s in segs if abs(s.volume) >= min_volume]
        d = min_distance[0 if side is Side.SUPPLY else 1]
        if d > 0:
            while True:
                bad = next((i for i in range(len(segs) - 1)
                            if segs[i + 1].price - segs[i].price < d), None)
                if bad is None:
                    break
                a, b = segs[bad], segs[bad + 1]
                segs = _without(segs, bad if abs(a.volume) < abs(b.volume) else bad + 1)
        while len(segs) > max_segments:
            segs = _without(segs, _smallest(segs))
        out[(node, side)] = segs
    return BidSet(bids.target_hour, out, BLOCK)


def to_tiered(curve, side) -> list[BidSegment]:
    """Cumulative tiers: clearing the single deepest tier pays what the blocks pay.

    Supply tiers ascend in price, demand tiers descend.
    """
    side = Side(side)
    curve = list(curve)
    if len({s.price for s in curve}) != len(curve):
        raise InvalidCurveError("duplicate prices in block curve")
    curve.sort(key=lambda s: s.price, reverse=side is Side.DEMAND)
    cum = np.cumsum([s.volume for s in curve])
    return [BidSegment(s.price, float(c)) for s, c in zip(curve, cum)]


def block_payoff(curve, side, lam: float, delta: float) -> float:
    """Independent clearing of every block; volumes are summed in clearing order
    (supply ascending, demand descending) so the result matches the tiers bit for bit."""
    side = Side(side)
    cleared = 0.0
    for s in sorted(curve, key=lambda s: s.price, reverse=side is Side.DEMAND):
        if (lam >= s.price) if side is Side.SUPPLY else (lam <= s.price):
            cleared += s.volume
    return cleared * delta


def tiered_payoff(tiers, side, lam: float, delta: float) -> float:
    """At most one tier clears: the last one (in tier order) whose price test passes."""
    side = Side(side)
    hit = None
    for t in tiers:
        if (lam >= t.price) if side is Side.SUPPLY else (lam <= t.price):
            hit = t
    return 0.0 if hit is None else hit.volume * delta


# ---------------------------------------------------------------- file I/O

def write_bids_csv(bidsets, path, header_comments=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for bs in bidsets:
            for node, side, i, s in bs.segments():
                w.writerow([str(bs.target_hour), node, side.value, i, repr(s.price), repr(s.volume)])


def read_bids_csv(path) -> list[BidSet]:
    """Read bid sets back; hours without segments are not represented in CSV."""
    hours: dict = {}
    with open(path, newline="") as fh:
        lines = (ln for ln in fh if not ln.startswith("#"))
        reader = csv.DictReader(lines)
        if reader.fieldnames is None:
            return []
        missing = set(CSV_COLUMNS) - set(reader.fieldnames)
        if missing:
            raise ParseError(f"missing columns {sorted(missing)}", 1)
        for k, row in enumerate(reader, start=2):
            try:
                seg = BidSegment(float(row["price"]), float(row["volume"]))
                key = (row["node"], Side(row["side"]))
                hour = _hour(row["target_hour"])
            except (ValueError, InvalidCurveError) as exc:
                raise ParseError(str(exc), k) from exc
            hours.setdefault(hour, {}).setdefault(key, []).append(seg)
    return [BidSet(h, c) for h, c in sorted(hours.items())]


def bidset_to_dict(bs: BidSet) -> dict:
    return {
        "target_hour": str(bs.target_hour),
        "interpretation": bs.interpretation,
        "curves": [
            {"node": node, "side": side.value,
             "segments": [{"price": s.price, "volume": s.volume} for s in segs]}
            for (node, side), segs in bs.curves.items()
        ],
    }


def bidset_from_dict(d: dict) -> BidSet:
    curves = {(c["node"], Side(c["side"])): [BidSegment(float(s["price"]), float(s["volume"]))
                                              for s in c["segments"]]
              for c in d["curves"]}
    return BidSet(_hour(d["target_hour"]), curves, d.get("interpretation", BLOCK))


def write_bids_json(bidsets, path, extra=None) -> None:
    doc = dict(extra or {})
    doc["bidsets"] = [bidset_to_dict(b) for b in bidsets]
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def read_bids_json(path) -> list[BidSet]:
    with open(path) as fh:
        return [bidset_from_dict(d) for d in json.load(fh)["bidsets"]]
