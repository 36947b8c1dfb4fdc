"""Revenue, volume and bid statistics of backtest reports, with subsampling intervals."""
from __future__ import annotations

import numpy as np

from ..errors import BlockSizeError
from ..risk import expected_shortfall, expected_windfall

MEAN = "mean"
EXPECTED_SHORTFALL = "expected_shortfall"
STATISTICS = (MEAN, EXPECTED_SHORTFALL)


def _series(report_or_series) -> np.ndarray:
    if hasattr(report_or_series, "normalized_revenues"):
        r = report_or_series.normalized_revenues
    else:
        r = np.asarray(report_or_series, dtype=float).ravel()
    if r.size == 0:
        raise ValueError("empty report")
    return r


def revenue_statistics(report, alpha: float = 0.05) -> dict:
    """Mean, expected shortfall and expected windfall of normalized hourly revenues."""
    r = _series(report)
    return {
        "expected_value": float(r.mean()),
        "expected_shortfall": expected_shortfall(r, alpha),
        "expected_windfall": expected_windfall(r, alpha),
    }


def _pct(part, whole):
    return 100.0 * part / whole if whole > 0 else float("nan")


def volume_statistics(report) -> dict:
    """Hourly mean attempted / cleared volumes and supply-demand shares of the summed volumes.

    Shares are NaN when the corresponding total volume is zero.
    """
    outs = report.outcomes
    if not outs:
        raise ValueError("empty report")
    a_s = sum(o.attempted_supply for o in outs)
    a_d = sum(o.attempted_demand for o in outs)
    c_s = sum(o.cleared_supply for o in outs)
    c_d = sum(o.cleared_demand for o in outs)
    n = len(outs)
    return {
        "attempted_mean": (a_s + a_d) / n,
        "attempted_supply_pct": _pct(a_s, a_s + a_d),
        "attempted_demand_pct": _pct(a_d, a_s + a_d),
        "cleared_mean": (c_s + c_d) / n,
        "cleared_supply_pct": _pct(c_s, c_s + c_d),
        "cleared_demand_pct": _pct(c_d, c_s + c_d),
    }


def bid_statistics(report) -> dict:
    """Position and curve-shape statistics of the submitted bids.

    A position is an (hour, node) with any bid; it is double when both
    sides are present.  Step counts are taken per curve (one side of one
    node in one hour).
    """
    outs = report.outcomes
    if not outs:
        raise ValueError("empty report")
    single = double = 0
    steps = []
    for o in outs:
        sides_at = {}
        for (node, side), segs in o.bids.curves.items():
            sides_at.setdefault(node, set()).add(side)
            steps.append(len(segs))
        for s in sides_at.values():
            if len(s) == 2:
                double += 1
            else:
                single += 1
    steps = np.array(steps, dtype=np.int64)
    positions, curves = single + double, steps.size
    return {
        "single_position_pct": _pct(single, positions),
        "double_position_pct": _pct(double, positions),
        "max_segments": int(steps.max()) if curves else 0,
        "one_step_pct": _pct(int((steps == 1).sum()), curves),
        "two_step_pct": _pct(int((steps == 2).sum()), curves),
        "more_step_pct": _pct(int((steps > 2).sum()), curves),
    }


def _statistic(x, statistic, alpha):
    if statistic == MEAN:
        return float(x.mean())
    if statistic == EXPECTED_SHORTFALL:
        return expected_shortfall(x, alpha)
    raise ValueError(f"unknown statistic {statistic!r}; choose from {STATISTICS}")


def block_starts(n: int, block_length: int, stride: int = 24) -> np.ndarray:
    """Overlapping block offsets every ``stride`` hours, plus the block ending at the series end."""
    starts = np.arange(0, n - block_length + 1, stride)
    if starts[-1] != n - block_length:
        starts = np.append(starts, n - block_length)
    return starts


def subsample_ci(series, statistic: str = MEAN, block_length: int = 17520,
                 confidence: float = 0.95, alpha: float = 0.05, stride: int = 24):
    """Empirical two-sided interval of a statistic over contiguous blocks.

    The statistic is evaluated on every block of ``block_length`` hours
    (see :func:`block_starts`); the interval is the pair of empirical
    quantiles at ``(1 -/+ confidence) / 2``.
    """
    x = _series(series)
    if not 1 <= block_length < x.size:
        raise BlockSizeError(f"need 1 <= block_length < series length ({x.size}), got {block_length}")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    if stride < 1:
        raise ValueError("stride must be positive")
    starts = block_starts(x.size, block_length, stride)
    vals = np.array([_statistic(x[s:s + block_length], statistic, alpha) for s in starts])
    lo, hi = np.quantile(vals, [(1.0 - confidence) / 2.0, (1.0 + confidence) / 2.0])
    return float(lo), float(hi)
