"""Rolling-window backtests: clearing, settlement, statistics and report files."""
from .clearing import ClearedBids, clear_bids, settle
from .engine import (MODEL_KINDS, SAMPLE_P, SAMPLE_P_MAX, SAMPLE_V, SAMPLE_VP, BacktestReport,
                     BacktestSettings, HourlyOutcome, config_hash, hour_range, optimize_hour, panel_fingerprint,
                     recipe_bids, score_all, SolveFailure,
                     run_backtest, run_backtests, simulate_hour, validate_coverage)
from .reporting import read_csv_table, read_report, write_report, write_solve_times, write_tables
from .stats import (EXPECTED_SHORTFALL, MEAN, bid_statistics, block_starts, revenue_statistics,
                    subsample_ci, volume_statistics)

__all__ = [n for n in dir() if not n.startswith("_")]
