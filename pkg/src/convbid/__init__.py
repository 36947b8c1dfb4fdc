"""Convergence-bid optimization with sample-based mean / expected-shortfall models."""
from .errors import ConvBidError, CoverageError, DegenerateQuantileError, ParseError
from .market_data import (NodeClustering, PricePanel, TrainingWindow, cluster_nodes, load_panel,
                          load_price_csv, rolling_window, save_panel)
from .risk import expected_shortfall, expected_windfall, k_of

__version__ = "0.1.0"
