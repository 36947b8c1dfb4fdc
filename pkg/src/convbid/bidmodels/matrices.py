"""Candidate bid prices and cleared-rejected delta matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..market_data import TrainingWindow
from .config import Side


@dataclass(frozen=True, eq=False)
class CandidatePrices:
    node: str
    side: Side
    prices: np.ndarray

    def __len__(self):
        return self.prices.shape[0]


@dataclass(frozen=True, eq=False)
class ClearedDeltaMatrix:
    """``matrix[t, q]`` is the sample delta when candidate ``q`` clears at sample ``t``, else 0."""

    node: str
    side: Side
    prices: np.ndarray
    matrix: np.ndarray


def clearing_indicator(da: np.ndarray, prices: np.ndarray, side: Side) -> np.ndarray:
    """(T, P) boolean; clearing is inclusive at equality."""
    da = np.asarray(da, dtype=float)[:, None]
    prices = np.asarray(prices, dtype=float)[None, :]
    if Side(side) is Side.SUPPLY:
        return da >= prices
    return da <= prices


def candidate_prices(window: TrainingWindow, node, side, price_bounds=(-np.inf, np.inf)) -> CandidatePrices:
    lam = window.da_of(node)
    lo, hi = price_bounds
    p = np.unique(lam)
    p = p[(p >= lo) & (p <= hi)]
    return CandidatePrices(node, Side(side), p)


def build_cleared_delta_matrix(window: TrainingWindow, node, side,
                               candidates: CandidatePrices) -> ClearedDeltaMatrix:
    lam = window.da_of(node)
    delta = window.delta_of(node)
    ind = clearing_indicator(lam, candidates.prices, side)
    mat = np.where(ind, delta[:, None], 0.0)
    return ClearedDeltaMatrix(node, Side(side), candidates.prices, mat)
