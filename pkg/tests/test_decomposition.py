import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2_contingency

from condwalk.decomposition import (MinimumSplit, decomposition_paths, decomposition_splits, empirical_minimum_law,
                                    minimum_law, minimum_tail, pre_minimum_exact, pre_minimum_smallness_check,
                                    sample_minimum_split, sample_plus_by_decomposition, split_at_minimum)
from condwalk.kernel import die_at_zero_law, plus_law
from condwalk.laws import PathSample
from condwalk.renewal import renewal_table
from condwalk.rng import Stream
from condwalk.samplers import plus_kernel_for, plus_paths
from condwalk.stats import chi2_sample, ks_pvalue, ks_two_sample


def test_minimum_law_examples(ssrw, down2):
    t = renewal_table(ssrw, 10)
    assert minimum_law(t, 2).mass == pytest.approx([1 / 3] * 3)
    assert minimum_law(t, 0).as_dict() == {0: 1.0}
    t2 = renewal_table(down2, 10)
    m = minimum_law(t2, 5)
    for x in range(6):
        assert sum(m.mass[x:]) == pytest.approx(t2.V[5 - x] / t2.V[5], abs=1e-15)
        assert minimum_tail(t2, 5, x) == pytest.approx(t2.V[5 - x] / t2.V[5], abs=1e-15)


def test_minimum_law_sums_to_one(ssrw, lazy, down2):
    for law in (ssrw, lazy, down2):
        t = renewal_table(law, 200)
        worst = max(abs(minimum_law(t, y).total - 1.0) for y in range(201))
        assert worst <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=1, max_size=40), st.integers(0, 5))
def test_split_at_minimum_invariants(steps, start):
    vals = np.concatenate([[start], start + np.cumsum(steps)])
    sp = split_at_minimum(PathSample(start, vals))
    pre = sp.pre_path.values
    assert pre[-1] == sp.min_value and np.all(pre[:-1] > sp.min_value)
    assert sp.post_path.values[0] == 0 and np.all(sp.post_path.values >= 0)
    assert np.array_equal(sp.joined().values, vals)


def test_y_zero_reduces_to_plus_chain(lazy):
    a = decomposition_paths(lazy, None, 0, 6, 200_000, np.random.default_rng(1))
    assert chi2_sample(a, plus_law(lazy, None, 0, 6))[1] > 1e-3


def test_ssrw_decomposition_endpoint_law(ssrw):
    e = decomposition_paths(ssrw, None, 3, 8, 1_000_000, np.random.default_rng(2))
    assert chi2_sample(e, plus_law(ssrw, None, 3, 8))[1] > 1e-3


def test_recorded_paths_are_valid_plus_paths(lazy):
    p = decomposition_paths(lazy, None, 3, 12, 2000, np.random.default_rng(3), record=True)
    assert np.all(p[:, 0] == 3) and np.all(p >= 0)
    assert np.all(np.isin(np.diff(p, axis=1), [-1, 0, 1]))
    one = sample_plus_by_decomposition(lazy, None, 2, 5, Stream(4))
    assert one.n_steps == 5 and one.start == 2


@pytest.mark.parametrize("y", [1, 3])
@pytest.mark.parametrize("n", [4, 16])
def test_decomposition_matches_kernel_sampler(lazy, y, n):
    g = np.random.default_rng(10 * y + n)
    a = decomposition_paths(lazy, None, y, n, 100_000, g)
    b = plus_paths(plus_kernel_for(lazy, y, n), y, n, 100_000, g)
    assert ks_pvalue(ks_two_sample(a, b), a.size, b.size) > 1e-3


def test_minimum_split_record(ssrw):
    sp = sample_minimum_split(ssrw, None, 3, 4, Stream(5))
    assert isinstance(sp, MinimumSplit)
    assert sp.pre_path.values[-1] == sp.min_value and np.all(sp.pre_path.values[:-1] > sp.min_value)
    assert sp.min_time == sp.pre_path.n_steps
    assert sp.post_path.values[0] == 0 and np.all(sp.post_path.values >= 0)


def test_pre_and_post_minimum_are_independent(lazy):
    sp = decomposition_splits(lazy, None, 3, 100_000, np.random.default_rng(6), max_steps=2000, post_steps=1)
    # unfinished pre-minimum paths (m = -1) form the last bin
    m = np.where(sp["m"] < 0, 10**9, sp["m"])
    m_bin = np.digitize(m, [1, 3, 10, 2001])
    step = sp["post"][:, 1]
    table = np.array([[np.sum((m_bin == i) & (step == s)) for s in (0, 1)] for i in range(5)])
    table = table[table.sum(axis=1) > 0]
    assert chi2_contingency(table)[1] > 1e-3


def test_pre_minimum_lifetime_law(lazy):
    y = 3
    t = renewal_table(lazy, 200)
    sp = decomposition_splits(lazy, t, y, 200_000, np.random.default_rng(7), max_steps=32)
    ml = minimum_law(t, y)
    expected = np.zeros(33)
    for x, w in zip(ml.states, ml.mass):
        z = y - x
        if z == 0:
            expected += w
        else:
            expected += w * die_at_zero_law(lazy, t, int(z), 32).extras["lifetime_cdf"]
    m = sp["m"]
    emp = np.array([np.mean((m >= 0) & (m <= n)) for n in range(33)])
    se = np.sqrt(expected * (1 - expected) / m.size) + 1e-12
    assert np.all(np.abs(emp - expected) <= 3 * se + 1e-9)


def test_empirical_minimum_law(lazy):
    t = renewal_table(lazy, 200)
    r = empirical_minimum_law(lazy, t, 3, 200_000, np.random.default_rng(8))
    exact = minimum_law(t, 3).mass
    assert np.all(np.abs(r["mean"] - exact) <= 3.5 * r["se"])


def test_smallness_trivial_and_bound(ssrw):
    r = pre_minimum_smallness_check(ssrw, [64, 256], y_of_N=lambda N: 0, samples=2000, seed=1)
    for row in r["rows"]:
        assert row["p_long"] == 0.0 and row["p_high"] == 0.0
    r = pre_minimum_smallness_check(ssrw, [256, 1024], y_of_N=lambda N: 1, eps=0.3, samples=20_000, seed=2)
    for row in r["rows"]:
        assert row["p_high"] <= row["high_bound"] + 3 * row["p_high_se"]
        assert abs(row["p_long"] - row["p_long_exact"]) <= 4 * math.sqrt(
            row["p_long_exact"] * (1 - row["p_long_exact"]) / row["samples"]) + 1e-12


def test_start_above_level_is_high(ssrw):
    # sup over k <= m includes S_0, so a start at or above the level always counts
    r = pre_minimum_smallness_check(ssrw, [64], y_of_N=lambda N: 8, eps=0.1, samples=5000, seed=3)
    assert r["rows"][0]["p_high"] == 1.0


def test_pre_minimum_exact_small_case(ssrw):
    # y = 1: minimum 0 or 1 with prob 1/2 each; from z = 1 the SSRW lifetime is >= 2 w.p. 1/2
    assert pre_minimum_exact(ssrw, None, 1, 2) == pytest.approx(0.25)
    assert pre_minimum_exact(ssrw, None, 1, 0) == 1.0
