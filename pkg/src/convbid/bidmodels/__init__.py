"""Sample-based mean / expected-shortfall bid models and bid curves."""
from .bids import (BLOCK, TIERED, BidSegment, BidSet, block_payoff, enforce_market_rules,
                   extract_bids, read_bids_csv, read_bids_json, tiered_payoff, to_tiered,
                   write_bids_csv, write_bids_json)
from .config import SIDES, ModelConfig, Side
from .matrices import (CandidatePrices, ClearedDeltaMatrix, build_cleared_delta_matrix,
                       candidate_prices, clearing_indicator)
from .models import (SAMPLE_P, SAMPLE_P_MILP, SAMPLE_V, SAMPLE_VP, SAMPLE_VP_MILP, BuiltModel,
                     SegmentVars, VariableMap, build_sample_p_lp, build_sample_p_milp,
                     build_sample_v, build_sample_vp, build_sample_vp_milp, score_positions,
                     solve_model, trim_idle_volume)

__all__ = [n for n in dir() if not n.startswith("_")]
