import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_panel
from convbid.backtest import (EXPECTED_SHORTFALL, MEAN, SAMPLE_P, SAMPLE_P_MAX, SAMPLE_V,
                              SAMPLE_VP, BacktestReport, BacktestSettings, HourlyOutcome,
                              bid_statistics, block_starts, clear_bids, hour_range, read_csv_table,
                              read_report, revenue_statistics, run_backtest, run_backtests, settle,
                              subsample_ci, volume_statistics, write_report, write_tables)
from convbid.bidmodels import BidSegment, BidSet, ModelConfig, Side
from convbid.errors import BlockSizeError, CoverageError, SettlementDataError
from convbid.synthetic import make_synthetic_panel

S, D = Side.SUPPLY, Side.DEMAND
H = "2019-01-01T00"


def bs(curves):
    return BidSet(H, {k: [BidSegment(p, v) for p, v in segs] for k, segs in curves.items()})


# ---------------------------------------------------------------- clearing and settlement

def test_clearing_examples():
    assert clear_bids(bs({("a", S): [(25, 10)]}), {"a": 25}).volume() == 10
    assert clear_bids(bs({("a", D): [(25, -10)]}), {"a": 30}).volume() == 0
    assert clear_bids(bs({("a", S): [(10, 2), (20, 3)]}), {"a": 15}).volume() == 2
    with pytest.raises(SettlementDataError):
        clear_bids(bs({("a", S): [(10, 2)]}), {"b": 15})
    with pytest.raises(SettlementDataError):
        clear_bids(bs({("a", S): [(10, 2)]}), {"a": float("nan")})


def test_settlement_examples():
    assert settle(clear_bids(bs({("a", S): [(0, 10)]}), {"a": 5}), {"a": 3}) == 30
    assert settle(clear_bids(bs({("a", D): [(9, -10)]}), {"a": 5}), {"a": 3}) == -30
    assert settle(clear_bids(bs({("a", S): [(9, 10)]}), {"a": 5}), {"a": 3}) == 0
    with pytest.raises(SettlementDataError):
        settle(clear_bids(bs({("a", S): [(0, 1)]}), {"a": 5}), {})


curves = st.lists(st.tuples(st.integers(-20, 20), st.floats(0.5, 50)), min_size=1, max_size=6,
                  unique_by=lambda t: t[0])


@settings(max_examples=100, deadline=None)
@given(curves, st.sampled_from([S, D]), st.integers(-25, 25), st.integers(-25, 25))
def test_clearing_monotone_in_price(segs, side, lam1, lam2):
    b = bs({("a", side): [(float(p), side.sign * v) for p, v in segs]})
    lo, hi = sorted((lam1, lam2))
    v_lo, v_hi = clear_bids(b, {"a": lo}).volume(), clear_bids(b, {"a": hi}).volume()
    assert (v_hi >= v_lo) if side is S else (v_lo >= v_hi)


@settings(max_examples=100, deadline=None)
@given(curves, st.integers(-25, 25), st.floats(-50, 50), st.floats(-50, 50), st.floats(-3, 3))
def test_settlement_linear(segs, lam, d1, d2, k):
    b = bs({("a", S): [(float(p), v) for p, v in segs]})
    c = clear_bids(b, {"a": lam})
    assert settle(c, {"a": d1 + d2}) == pytest.approx(settle(c, {"a": d1}) + settle(c, {"a": d2}), abs=1e-6)
    assert settle(c, {"a": k * d1}) == pytest.approx(k * settle(c, {"a": d1}), abs=1e-6)


# ---------------------------------------------------------------- statistics

def _outcome(rev, a_s=0.0, a_d=0.0, c_s=0.0, c_d=0.0, bids=None, hour=H):
    return HourlyOutcome(np.datetime64(hour, "h"), "m", a_s, a_d, c_s, c_d, rev * 1000, rev,
                         bids if bids is not None else BidSet(hour))


def _report(outs):
    return BacktestReport("m", ModelConfig(), BacktestSettings(), tuple(outs))


def test_revenue_statistics_examples():
    assert revenue_statistics(_report([_outcome(1.0)] * 4), 0.25) == \
        {"expected_value": 1.0, "expected_shortfall": -1.0, "expected_windfall": 1.0}
    s = revenue_statistics([-10, 0, 5, 20], 0.5)
    assert (s["expected_value"], s["expected_shortfall"], s["expected_windfall"]) == (3.75, 5.0, 12.5)
    with pytest.raises(ValueError):
        revenue_statistics(_report([]), 0.05)


def test_volume_statistics_examples():
    v = volume_statistics(_report([_outcome(0, a_s=1000, c_s=500)] * 3))
    assert (v["attempted_mean"], v["attempted_supply_pct"], v["attempted_demand_pct"]) == (1000, 100, 0)
    assert (v["cleared_mean"], v["cleared_supply_pct"], v["cleared_demand_pct"]) == (500, 100, 0)
    v = volume_statistics(_report([_outcome(0, a_s=10, a_d=10, c_s=4, c_d=4)]))
    assert v["attempted_supply_pct"] == 50 and v["cleared_demand_pct"] == 50
    outs = [_outcome(0, 100, 300, 50, 100), _outcome(0, 200, 0, 200, 0), _outcome(0, 0, 0, 0, 0)]
    v = volume_statistics(_report(outs))
    assert v["attempted_mean"] == pytest.approx(200.0)
    assert v["attempted_supply_pct"] == pytest.approx(50.0)
    assert v["cleared_mean"] == pytest.approx(350 / 3)
    assert v["cleared_supply_pct"] == pytest.approx(100 * 250 / 350)
    assert np.isnan(volume_statistics(_report([_outcome(0)]))["attempted_supply_pct"])


def test_bid_statistics_examples():
    one = bs({("a", S): [(1, 5)], ("b", S): [(2, 3)]})
    st_ = bid_statistics(_report([_outcome(0, bids=one)] * 2))
    assert st_ == {"single_position_pct": 100.0, "double_position_pct": 0.0, "max_segments": 1,
                   "one_step_pct": 100.0, "two_step_pct": 0.0, "more_step_pct": 0.0}
    dbl = bs({("a", S): [(1, 5)], ("a", D): [(3, -5)]})
    assert bid_statistics(_report([_outcome(0, bids=dbl)] * 3))["double_position_pct"] == 100.0
    mixed = [bs({("a", S): [(1, 5), (2, 1)], ("a", D): [(3, -5)], ("b", D): [(1, -1), (2, -1), (3, -1)]}),
             bs({("c", S): [(1, 5)]})]
    st_ = bid_statistics(_report([_outcome(0, bids=b) for b in mixed]))
    # positions: (h0,a) double, (h0,b) single, (h1,c) single; curves: 2,1,3,1 steps
    assert st_["double_position_pct"] == pytest.approx(100 / 3)
    assert st_["single_position_pct"] == pytest.approx(200 / 3)
    assert st_["max_segments"] == 3
    assert (st_["one_step_pct"], st_["two_step_pct"], st_["more_step_pct"]) == (50.0, 25.0, 25.0)


def test_subsample_examples():
    assert subsample_ci(np.full(100, 2.5), MEAN, 10) == (2.5, 2.5)
    assert subsample_ci(np.full(100, 2.5), EXPECTED_SHORTFALL, 40, alpha=0.05) == (-2.5, -2.5)
    x = np.array([5.0, 1.0, 2.0, 3.0, 9.0])
    lo, hi = subsample_ci(x, MEAN, 4, confidence=0.999, stride=1)
    assert lo == pytest.approx(11 / 4, abs=1e-2) and hi == pytest.approx(15 / 4, abs=1e-2)
    ramp = np.arange(1000.0)
    lo, hi = subsample_ci(ramp, MEAN, 50, stride=24)
    assert lo < ramp.mean() < hi
    blocks = [ramp[s:s + 50].mean() for s in block_starts(1000, 50, 24)]
    assert (lo, hi) == pytest.approx(tuple(np.quantile(blocks, [0.025, 0.975])), rel=1e-12)
    with pytest.raises(BlockSizeError):
        subsample_ci(np.ones(10), MEAN, 10)


def test_block_starts_cover_the_end():
    assert block_starts(100, 30, 24).tolist() == [0, 24, 48, 70]
    assert block_starts(78, 30, 24).tolist() == [0, 24, 48]


# ---------------------------------------------------------------- end to end

@pytest.fixture(scope="module")
def panel():
    return make_synthetic_panel(n_nodes=4, days=40, seed=7)


CFG = ModelConfig(alpha=0.1, rho_tilde=1.0, total_volume=100.0, per_position_cap=20.0)
SET = BacktestSettings(lookback_days=30, n_positions=2, n_max_positions=1)
DAY = hour_range("2019-02-05T00", "2019-02-06T00")


def test_one_day_sample_v(panel):
    two = BacktestSettings(30, 1, 1, nodes=("N000", "N001"))
    rep = run_backtest(panel, SAMPLE_V, CFG, DAY, two)
    assert len(rep) == 24 and not rep.failures
    assert [o.target_hour for o in rep.outcomes] == list(DAY)
    for o in rep.outcomes:
        assert o.cleared_volume == pytest.approx(o.attempted_volume)
        assert o.normalized_revenue == o.revenue / CFG.total_volume


def test_zero_delta_panel_earns_nothing():
    flat = make_synthetic_panel(n_nodes=3, days=35, seed=1, zero_delta=True)
    reps = run_backtests(flat, [SAMPLE_VP, SAMPLE_V, SAMPLE_P, SAMPLE_P_MAX], CFG,
                         hour_range("2019-02-04T00", "2019-02-04T06"), SET)
    for rep in reps.values():
        assert all(o.revenue == 0.0 for o in rep.outcomes)


def test_zero_budget_on_losing_panel_posts_nothing():
    T = 24 * 12
    # constant day-ahead price: every bid clears every sample; deltas +5, +5, -3 repeating,
    # so supply has a positive mean but losing samples and demand a negative mean
    da = np.full((1, T), 30.0)
    delta = np.array([5.0, 5.0, -3.0])[(np.arange(T) // 24) % 3]
    p = make_panel(da, da - delta[None, :], ["a"])
    cfg = ModelConfig(alpha=0.25, rho_tilde=0.0, total_volume=100.0, per_position_cap=20.0)
    rep = run_backtest(p, SAMPLE_VP, cfg, hour_range("2019-01-11T00", "2019-01-11T04"),
                       BacktestSettings(9, 1, 1))
    assert not rep.failures
    assert all(o.attempted_volume == 0 and o.revenue == 0 for o in rep.outcomes)


def test_market_rules_in_outputs_and_consistency(panel):
    reps = run_backtests(panel, [SAMPLE_VP, SAMPLE_P, SAMPLE_P_MAX], CFG, DAY[:6], SET)
    for rep in reps.values():
        for o in rep.outcomes:
            assert o.cleared_supply <= o.attempted_supply + 1e-9
            assert o.cleared_demand <= o.attempted_demand + 1e-9
            assert o.attempted_volume <= CFG.total_volume + 1e-6
            for curve in o.bids.curves.values():
                assert len(curve) <= 10 and all(abs(s.volume) >= 1 for s in curve)


def test_coverage_error_names_first_hour(panel):
    with pytest.raises(CoverageError, match="2019-01-02T00"):
        run_backtest(panel, SAMPLE_V, CFG, hour_range("2019-01-02T00", "2019-01-02T03"), SET)


def test_unknown_kind(panel):
    with pytest.raises(ValueError):
        run_backtest(panel, "sample-X", CFG, DAY[:1], SET)


def _strip(rep):
    return [o.to_dict() for o in rep.outcomes]


def test_workers_and_resume_are_invisible(panel, tmp_path):
    hours = DAY[:8]
    kinds = [SAMPLE_VP, SAMPLE_P]
    one = run_backtests(panel, kinds, CFG, hours, SET, workers=1)
    two = run_backtests(panel, kinds, CFG, hours, SET, workers=2)
    for k in kinds:
        assert _strip(one[k]) == _strip(two[k])
        assert one[k].config_hash == two[k].config_hash
    ck = tmp_path / "ck"
    run_backtests(panel, kinds, CFG, hours[:3], SET, checkpoint_dir=ck)
    seen = []
    resumed = run_backtests(panel, kinds, CFG, hours, SET, checkpoint_dir=ck, resume=True,
                            progress=seen.append)
    assert seen == list(hours[3:])
    for k in kinds:
        assert _strip(resumed[k]) == _strip(one[k])


def test_report_files_round_trip(panel, tmp_path):
    reps = run_backtests(panel, [SAMPLE_P, SAMPLE_V], CFG, DAY, SET)
    for rep in reps.values():
        paths = write_report(rep, tmp_path)
        back = read_report(paths["json"])
        assert _strip(back) == _strip(rep) and back.config == rep.config
        digest, rows = read_csv_table(paths["csv"])
        assert digest == rep.config_hash and len(rows) == 24
    paths = write_tables(list(reps.values()), tmp_path, alpha=0.1, block_length=12, stride=2)
    for p in paths.values():
        digest, rows = read_csv_table(p)
        assert digest == reps[SAMPLE_P].config_hash and rows
    _, t1 = read_csv_table(paths["table1"])
    s = revenue_statistics(reps[SAMPLE_P], 0.1)
    assert float(t1[0]["expected_value"]) == s["expected_value"]
    _, daily = read_csv_table(paths["daily"])
    assert [r["date"] for r in daily] == ["2019-02-05", "2019-02-05"]
    doc = json.loads((tmp_path / "report_sample-p.json").read_text())
    assert doc["config_hash"] == reps[SAMPLE_P].config_hash


def test_no_lookahead(panel):
    """Bids for a target hour must not change when data from its day onward changes."""
    hours = hour_range("2019-02-03T00", "2019-02-03T12")
    seen = []
    reps = run_backtests(panel, [SAMPLE_VP, SAMPLE_P], CFG, hours, SET,
                         audit=lambda h, stamps: seen.append((h, stamps)))
    for h, stamps in seen:
        assert np.all(stamps.astype("datetime64[D]") < h.astype("datetime64[D]"))
    cut = np.datetime64("2019-02-03T00", "h")
    k = int((cut - panel.hours[0]).astype(int))
    rng = np.random.default_rng(0)
    da, rt = panel.da.copy(), panel.rt.copy()
    da[:, k:] += rng.normal(0, 30, da[:, k:].shape)
    rt[:, k:] += rng.normal(0, 30, rt[:, k:].shape)
    other = make_panel(da, rt, panel.nodes, start=str(panel.hours[0]))
    alt = run_backtests(other, [SAMPLE_VP, SAMPLE_P], CFG, hours, SET)
    for kind in reps:
        for a, b in zip(reps[kind].outcomes, alt[kind].outcomes):
            assert a.bids == b.bids and a.objective == b.objective
