import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convbid.bidmodels import (BidSegment, BidSet, ModelConfig, Side, block_payoff,
                               build_sample_vp, enforce_market_rules, extract_bids, read_bids_csv,
                               read_bids_json, tiered_payoff, to_tiered, write_bids_csv,
                               write_bids_json)
from convbid.bidmodels.bids import bidset_from_dict, bidset_to_dict
from convbid.errors import InvalidCurveError
from convbid.market_data import TrainingWindow
from convbid.solver import Solution, Status

S, D = Side.SUPPLY, Side.DEMAND
H = "2019-01-01T07"


def _weights(values):
    """Optimal-looking solution with the given weights on the price-10 and price-20 columns."""
    w = TrainingWindow.from_arrays([1.0, 1.0], [10.0, 20.0])
    cfg = ModelConfig(alpha=0.5, rho_tilde=float("inf"), total_volume=10, per_position_cap=10)
    m = build_sample_vp(w, [("n0", S)], cfg)
    x = np.zeros(m.program.num_vars)
    for seg in m.varmap.segments:
        x[seg.weight_col] = values.get(seg.price, 0.0)
    return Solution(Status.OPTIMAL, 0.0, x), m.varmap, cfg


def pairs(curve):
    return [(s.price, s.volume) for s in curve]


def test_extraction_examples():
    sol, vm, cfg = _weights({20.0: 10.0})
    assert pairs(extract_bids(sol, vm, cfg).curve("n0", S)) == [(20.0, 10.0)]
    sol, vm, cfg = _weights({10.0: 3.0, 20.0: 7.0})
    assert pairs(extract_bids(sol, vm, cfg).curve("n0", S)) == [(10.0, 3.0), (20.0, 7.0)]
    sol, vm, cfg = _weights({10.0: 1e-12, 20.0: -1e-11})
    bids = extract_bids(sol, vm, cfg)
    assert len(bids) == 0 and bids.curves == {}


def test_segment_and_set_validation():
    with pytest.raises(InvalidCurveError):
        BidSegment(10.0, 0.0)
    with pytest.raises(InvalidCurveError):
        BidSegment(float("nan"), 1.0)
    with pytest.raises(InvalidCurveError):
        BidSet(H, {("a", S): [BidSegment(1.0, -2.0)]})
    with pytest.raises(InvalidCurveError):
        BidSet(H, {("a", S): [BidSegment(1.0, 2.0), BidSegment(1.0, 3.0)]})
    bs = BidSet(H, {("a", D): [BidSegment(5.0, -2.0)], ("a", S): [BidSegment(9.0, 1.0), BidSegment(3.0, 4.0)]})
    assert pairs(bs.curve("a", S)) == [(3.0, 4.0), (9.0, 1.0)]
    assert bs.volume() == 7.0 and bs.volume(D) == 2.0 and len(bs) == 3


def _rules(segs, **kw):
    side = S if segs[0][1] > 0 else D
    bs = BidSet(H, {("a", side): [BidSegment(p, v) for p, v in segs]})
    return pairs(enforce_market_rules(bs, **kw).curve("a", side))


def test_market_rule_examples():
    assert _rules([(10, 0.5), (20, 5)], min_volume=1) == [(20, 5)]
    segs = [(float(p), float(v)) for p, v in zip(range(12), [5, 3, 9, 1.5, 7, 8, 2, 6, 4, 10, 11, 12])]
    kept = _rules(segs, max_segments=10)
    assert len(kept) == 10
    assert {v for _, v in segs} - {v for _, v in kept} == {1.5, 2}
    assert _rules([(10, 5), (10.5, 2)], min_distance=1) == [(10, 5)]
    assert _rules([(10, -5), (10.5, -2)], min_distance=(0, 1)) == [(10, -5)]
    assert _rules([(10, -5), (10.5, -2)], min_distance=(1, 0)) == [(10, -5), (10.5, -2)]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 60), st.floats(0.01, 50)), min_size=1, max_size=25,
                unique_by=lambda t: t[0]),
       st.integers(1, 10), st.floats(0, 5))
def test_market_rules_always_comply(segs, max_segments, dist):
    bs = BidSet(H, {("a", S): [BidSegment(float(p), v) for p, v in segs]})
    out = enforce_market_rules(bs, 1.0, max_segments, (dist, dist))
    curve = out.curve("a", S)
    assert len(curve) <= max_segments
    assert all(abs(s.volume) >= 1.0 for s in curve)
    assert all(b.price - a.price >= dist for a, b in zip(curve, curve[1:]))
    assert set(pairs(curve)) <= {(float(p), v) for p, v in segs}
    assert enforce_market_rules(out, 1.0, max_segments, (dist, dist)) == out


def test_tiered_examples():
    assert pairs(to_tiered([BidSegment(10, 5), BidSegment(20, 3)], S)) == [(10, 5), (20, 8)]
    assert pairs(to_tiered([BidSegment(7, -2)], D)) == [(7, -2)]
    assert pairs(to_tiered([BidSegment(30, -4), BidSegment(20, -2)], D)) == [(30, -4), (20, -6)]
    with pytest.raises(InvalidCurveError):
        to_tiered([BidSegment(10, 5), BidSegment(10, 3)], S)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(0.1, 100)), min_size=1, max_size=10,
                unique_by=lambda t: t[0]),
       st.sampled_from([S, D]), st.floats(-150, 150), st.floats(-50, 50))
def test_block_and_tiered_payoffs_agree(segs, side, lam, delta):
    curve = [BidSegment(p, side.sign * v) for p, v in segs]
    assert block_payoff(curve, side, lam, delta) == tiered_payoff(to_tiered(curve, side), side, lam, delta)


def _sample_sets():
    a = BidSet(H, {("n1", S): [BidSegment(10.25, 3.5), BidSegment(0.1 + 0.2, 1.0)],
                   ("n0", D): [BidSegment(-5.0, -2.0)]})
    b = BidSet("2019-01-01T08", {("n2", D): [BidSegment(1e-7, -1.0 / 3.0)]})
    return [a, b]


def test_csv_round_trip(tmp_path):
    sets = _sample_sets()
    write_bids_csv(sets, tmp_path / "b.csv", ["config_hash=abc"])
    text = (tmp_path / "b.csv").read_text().splitlines()
    assert text[0] == "# config_hash=abc"
    assert text[1] == "target_hour,node,side,segment_index,price,volume"
    assert read_bids_csv(tmp_path / "b.csv") == sets


def test_json_round_trip(tmp_path):
    sets = _sample_sets() + [BidSet("2019-01-01T09")]
    write_bids_json(sets, tmp_path / "b.json", {"config_hash": "abc"})
    assert read_bids_json(tmp_path / "b.json") == sets
    assert bidset_from_dict(bidset_to_dict(sets[0])) == sets[0]
