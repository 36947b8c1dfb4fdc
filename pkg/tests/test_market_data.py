import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_panel
from convbid.errors import (CoverageError, DuplicateRecordError, ParseError, UnknownNodeError,
                            ValidationError)
from convbid.market_data import (PricePanel, cluster_nodes, event_sync_scores, load_panel,
                                 load_price_csv, rolling_window, save_panel, write_clustering_csv)


def _write(path, text):
    path.write_text(text)
    return path


def test_load_computes_delta(tmp_path):
    rows = ["node,timestamp,da_lmp,rt_lmp"]
    da = [[10, 20, 30], [5, 5, 5]]
    rt = [[8, 25, 30], [5, 6, 4]]
    for i, n in enumerate(["A", "B"]):
        for h in range(3):
            rows.append(f"{n},2019-01-01T0{h}:00:00Z,{da[i][h]},{rt[i][h]}")
    panel = load_price_csv(_write(tmp_path / "p.csv", "\n".join(rows) + "\n"))
    assert panel.nodes == ("A", "B")
    np.testing.assert_array_equal(panel.delta, [[2, -5, 0], [0, -1, 1]])
    np.testing.assert_array_equal(panel.delta + panel.rt, panel.da)


def test_duplicate_rows_rejected(tmp_path):
    text = "node,timestamp,da_lmp,rt_lmp\nA,2019-01-01T00:00Z,1,1\nA,2019-01-01T00:00Z,2,2\n"
    with pytest.raises(DuplicateRecordError) as err:
        load_price_csv(_write(tmp_path / "d.csv", text))
    assert err.value.line == 3


def test_header_only_gives_empty_panel(tmp_path):
    panel = load_price_csv(_write(tmp_path / "e.csv", "node,timestamp,da_lmp,rt_lmp\n"))
    assert panel.num_nodes == 0 and panel.num_hours == 0


def test_malformed_and_nonfinite_rows(tmp_path):
    bad = "node,timestamp,da_lmp,rt_lmp\nA,2019-01-01T00:00Z,1,1\nA,2019-01-01T01:00Z,abc,1\n"
    with pytest.raises(ParseError, match="line 3"):
        load_price_csv(_write(tmp_path / "m.csv", bad))
    nan = "node,timestamp,da_lmp,rt_lmp\nA,2019-01-01T00:00Z,nan,1\n"
    with pytest.raises(ValidationError):
        load_price_csv(_write(tmp_path / "n.csv", nan))


def test_custom_schema_and_offsets(tmp_path):
    text = "pnode,time,dam,rtm\nA,2019-01-01T02:00:00+02:00,10,7\n"
    schema = {"node": "pnode", "timestamp": "time", "da_lmp": "dam", "rt_lmp": "rtm"}
    panel = load_price_csv(_write(tmp_path / "s.csv", text), schema)
    assert panel.hours[0] == np.datetime64("2019-01-01T00", "h")
    assert panel.delta[0, 0] == 3.0


def test_cache_round_trip(tmp_path):
    panel = make_panel(np.arange(6.0).reshape(2, 3), np.ones((2, 3)), tz="America/Los_Angeles")
    save_panel(panel, tmp_path / "c.npz")
    back = load_panel(tmp_path / "c.npz")
    assert back.nodes == panel.nodes and back.tz == panel.tz
    np.testing.assert_array_equal(back.hours, panel.hours)
    np.testing.assert_array_equal(back.delta, panel.delta)


def _daily_panel(days, n_nodes=2, start="2018-01-01T00"):
    H = days * 24
    da = np.tile(np.arange(H, dtype=float), (n_nodes, 1))
    return make_panel(da, da - 1.0, start=start)


def test_window_of_a_year():
    panel = _daily_panel(366)
    w = rolling_window(panel, "2019-01-01T07", 365)
    assert w.T == 365
    stamps = w.timestamps.astype("datetime64[h]")
    assert np.all((stamps - stamps.astype("datetime64[D]")).astype(int) == 7)
    assert stamps[0] == np.datetime64("2018-01-01T07") and stamps[-1] == np.datetime64("2018-12-31T07")


def test_window_of_one_day():
    panel = _daily_panel(3)
    w = rolling_window(panel, "2018-01-03T05", 1)
    assert w.timestamps.tolist() == [np.datetime64("2018-01-02T05", "h")]
    assert w.da[0, 0] == 24 + 5


def test_window_missing_day_and_unknown_node():
    panel = _daily_panel(5)
    da = panel.da.copy()
    da[0, 24 + 5] = np.nan
    holes = make_panel(da, panel.rt, start="2018-01-01T00")
    with pytest.raises(CoverageError) as err:
        rolling_window(holes, "2018-01-05T05", 4)
    assert err.value.missing == [np.datetime64("2018-01-02")]
    rolling_window(holes, "2018-01-05T05", 4, nodes=["n1"])
    with pytest.raises(CoverageError):
        rolling_window(panel, "2018-01-02T00", 5)
    with pytest.raises(UnknownNodeError):
        rolling_window(panel, "2018-01-05T05", 1, nodes=["zz"])


def test_window_uses_market_local_hour():
    H = 24 * 5
    da = np.tile(np.arange(H, dtype=float), (1, 1))
    panel = make_panel(da, da, start="2018-06-01T00", tz="America/Los_Angeles")
    w = rolling_window(panel, "2018-06-05T15", 2)  # 08:00 local
    assert [str(t) for t in w.timestamps] == ["2018-06-03T15", "2018-06-04T15"]


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20), st.integers(0, 23), st.integers(0, 2**32 - 1))
def test_window_size_and_hour_property(lookback, hod, seed):
    panel = _daily_panel(25, n_nodes=1)
    target = np.datetime64("2018-01-22T00", "h") + np.timedelta64(hod, "h")
    w = rolling_window(panel, target, lookback)
    assert w.T == lookback
    assert np.all((w.timestamps - w.timestamps.astype("datetime64[D]")).astype(int) == hod)
    assert np.all(w.timestamps < target.astype("datetime64[D]"))


def _event_panel(series):
    series = np.asarray(series, dtype=float)
    return make_panel(series, np.zeros_like(series))


def test_identical_series_cluster():
    x = np.random.default_rng(0).normal(size=500)
    c = cluster_nodes(_event_panel([x, x]), 0.98)
    assert c.representative == {"n0": "n0", "n1": "n0"}


def test_disjoint_events_do_not_cluster():
    a = np.zeros(200)
    b = np.zeros(200)
    a[:10], b[100:110] = 50.0, 50.0
    c = cluster_nodes(_event_panel([a, b]), 0.98)
    assert c.representative == {"n0": "n0", "n1": "n1"}


def _brute_scores(delta, q):
    events = []
    for row in delta:
        thr = np.quantile(np.abs(row), q)
        events.append({t for t, v in enumerate(row) if abs(v) > thr})
    n = len(events)
    s = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if events[i] and events[j]:
                s[i, j] = len(events[i] & events[j]) / np.sqrt(len(events[i]) * len(events[j]))
    return s


def test_three_copies_plus_two_singletons():
    rng = np.random.default_rng(7)
    base = rng.normal(size=1000)
    rows = [base + rng.normal(scale=1e-6, size=1000) for _ in range(3)]
    rows += [rng.normal(size=1000), rng.normal(size=1000)]
    panel = _event_panel(rows)
    np.testing.assert_allclose(event_sync_scores(panel), _brute_scores(panel.delta, 0.95))
    c = cluster_nodes(panel, 0.98)
    assert c.representative == {"n0": "n0", "n1": "n0", "n2": "n0", "n3": "n3", "n4": "n4"}


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.permutations(range(6)))
def test_clustering_is_permutation_invariant(seed, perm):
    rng = np.random.default_rng(seed)
    base = rng.normal(size=(3, 300))
    rows = np.vstack([base, base[[0, 1, 2]] + rng.normal(scale=1e-6, size=(3, 300))])
    names = [f"x{i}" for i in range(6)]
    a = cluster_nodes(make_panel(rows, np.zeros_like(rows), names), 0.98)
    pr = rows[list(perm)]
    pn = [names[i] for i in perm]
    b = cluster_nodes(make_panel(pr, np.zeros_like(pr), pn), 0.98)
    assert a.representative == b.representative
    s = event_sync_scores(make_panel(rows, np.zeros_like(rows), names))
    np.testing.assert_allclose(s, s.T)
    for node, rep in a.representative.items():
        assert a.representative[rep] == rep


def test_empty_clustering_and_csv(tmp_path):
    empty = PricePanel((), np.zeros(0, "datetime64[h]"), np.zeros((0, 0)), np.zeros((0, 0)))
    assert cluster_nodes(empty).representative == {}
    x = np.random.default_rng(1).normal(size=100)
    c = cluster_nodes(_event_panel([x, x]))
    write_clustering_csv(c, tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines() == ["node,representative", "n0,n0", "n1,n0"]
