import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convbid.errors import DegenerateQuantileError
from convbid.risk import es_objective, expected_shortfall, expected_windfall, k_of
from convbid.solver import LPBuilder, GE, LE, Status, solve_lp

samples = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=10, max_size=40)


def test_k_of_examples():
    assert k_of(0.05, 365) == 18
    assert k_of(0.5, 4) == 2
    with pytest.raises(DegenerateQuantileError):
        k_of(0.01, 50)


def test_shortfall_examples():
    assert expected_shortfall([-10, 0, 5, 20], 0.5) == 5.0
    assert expected_shortfall([3, 1, 2, 0], 0.25) == 0.0
    assert expected_shortfall([7.5] * 8, 0.25) == -7.5


def test_windfall_examples():
    assert expected_windfall([-10, 0, 5, 20], 0.5) == 12.5
    assert expected_windfall([3, 1, 2, 0], 0.25) == 3.0
    assert expected_windfall([7.5] * 8, 0.25) == 7.5


def test_bad_samples():
    with pytest.raises(ValueError):
        expected_shortfall([], 0.5)
    with pytest.raises(ValueError):
        expected_shortfall([1.0, np.nan], 0.5)
    with pytest.raises(DegenerateQuantileError):
        expected_shortfall([1.0, 2.0], 0.1)


def _es_lp(r, alpha):
    """Minimize -tau + (1/K) sum z over the (tau, z) representation."""
    T, K = len(r), k_of(alpha, len(r))
    b = LPBuilder()
    tau = b.add_vars(1, lb=-np.inf, obj=-1.0)[0]
    z = b.add_vars(T, lb=0.0, obj=1.0 / K)
    for t in range(T):
        b.add_row([z[t], tau], [1.0, -1.0], GE, -r[t])
    return solve_lp(b.build(maximize=False))


@settings(max_examples=60, deadline=None)
@given(samples, st.sampled_from([0.1, 0.25, 0.5]))
def test_lp_representation_matches_sort(r, alpha):
    sol = _es_lp(r, alpha)
    assert sol.status == Status.OPTIMAL
    assert sol.objective_value == pytest.approx(expected_shortfall(r, alpha), abs=1e-7)


@settings(max_examples=100, deadline=None)
@given(samples, st.sampled_from([0.1, 0.25, 0.5]))
def test_tau_scan_matches_sort(r, alpha):
    best = min(es_objective(r, alpha, tau) for tau in r)
    assert best == pytest.approx(expected_shortfall(r, alpha), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(samples, st.floats(-100, 100), st.floats(0, 10))
def test_translation_and_homogeneity(r, c, s):
    r = np.array(r)
    es = expected_shortfall(r, 0.25)
    assert expected_shortfall(r + c, 0.25) == pytest.approx(es - c, abs=1e-8)
    assert expected_shortfall(s * r, 0.25) == pytest.approx(s * es, abs=1e-8)


@settings(max_examples=100, deadline=None)
@given(samples)
def test_windfall_is_shortfall_of_negated_samples(r):
    # the K largest of r are the K smallest of -r, negated twice
    r = np.array(r)
    assert expected_windfall(r, 0.25) == pytest.approx(expected_shortfall(-r, 0.25), abs=1e-12)


def test_windfall_sign_on_spike():
    assert expected_windfall([0.0, 0.0, 0.0, 1.0], 0.25) == 1.0
    assert expected_shortfall([-0.0, -0.0, -0.0, -1.0], 0.25) == 1.0
