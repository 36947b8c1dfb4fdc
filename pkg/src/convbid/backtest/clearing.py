"""Day-ahead clearing of block bids and settlement against realized deltas."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..bidmodels import BLOCK, BidSet, Side
from ..errors import SettlementDataError


@dataclass(frozen=True, eq=False)
class ClearedBids:
    """Cleared volume of every segment, aligned with ``bids.curves``."""

    bids: BidSet
    cleared: dict

    def volume(self, side=None) -> float:
        return float(sum(np.abs(v).sum() for (_, sd), v in self.cleared.items()
                         if side is None or sd is Side(side)))


def _price_of(table, node, what):
    try:
        value = table[node]
    except KeyError:
        raise SettlementDataError(f"no realized {what} for node {node!r}") from None
    value = float(value)
    if not np.isfinite(value):
        raise SettlementDataError(f"realized {what} for node {node!r} is not finite")
    return value


def clear_bids(bids: BidSet, realized_da) -> ClearedBids:
    """Supply clears when ``lambda* >= price``, demand when ``lambda* <= price``; no partial fills."""
    if bids.interpretation != BLOCK:
        raise ValueError("clear_bids expects block curves")
    out = {}
    for (node, side), segs in bids.curves.items():
        lam = _price_of(realized_da, node, "day-ahead price")
        prices = np.array([s.price for s in segs])
        vols = np.array([s.volume for s in segs])
        hit = lam >= prices if side is Side.SUPPLY else lam <= prices
        out[(node, side)] = np.where(hit, vols, 0.0)
    return ClearedBids(bids, out)


def settle(cleared: ClearedBids, realized_delta) -> float:
    """Gross revenue: sum of cleared volume times the node's realized delta."""
    total = 0.0
    for (node, _), vols in cleared.cleared.items():
        delta = _price_of(realized_delta, node, "delta")
        for v in vols:
            total += float(v) * delta
    return total
