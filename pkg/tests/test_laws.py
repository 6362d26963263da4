import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condwalk.errors import DegenerateSupport, MonotoneDriftWarning, NonNormalized
from condwalk.laws import (PathSample, is_aperiodic, load_law, make_step_law, named_law, sample_first_entrance,
                           sample_path, sample_paths)
from condwalk.rng import Stream


def test_named_laws_have_expected_moments(ssrw, lazy):
    assert ssrw.mean == 0 and ssrw.variance == 1
    assert lazy.mean == 0 and lazy.variance == 0.5
    assert (ssrw.alpha, ssrw.rho) == (2.0, 0.5)


def test_aperiodicity_uses_gcd_of_differences(ssrw, lazy):
    assert lazy.aperiodic
    assert not ssrw.aperiodic
    assert not named_law("ssrw-periodic").aperiodic
    assert is_aperiodic([-1, 1, 2])


def test_rejects_unnormalised_and_one_sided_laws():
    with pytest.raises(NonNormalized):
        make_step_law([-1, 1], [0.5, 0.6])
    with pytest.raises(DegenerateSupport):
        make_step_law([0, 1], [0.5, 0.5])
    with pytest.raises(DegenerateSupport):
        make_step_law([3, -1], [1.0, 0.0])


def test_drift_without_tags_warns():
    with pytest.warns(MonotoneDriftWarning):
        make_step_law([-2, 1], [0.25, 0.75])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        make_step_law([-2, 1], [1 / 3, 2 / 3])


def test_zipf2_is_symmetric_and_records_truncation():
    z = named_law("zipf2", K=1000)
    assert z.alpha == 1.0 and z.rho == 0.5
    assert abs(z.mean) < 1e-12
    assert z.p(1) == pytest.approx(z.p(-1))
    assert z.p(1) / z.p(2) == pytest.approx(4.0)
    # tail beyond K of sum k^-2 is about 1/K; relative to pi^2/6
    assert z.truncated_mass == pytest.approx(1 / 1000 / (np.pi ** 2 / 6), rel=2e-3)


def test_json_round_trip(tmp_path, lazy):
    p = tmp_path / "law.json"
    p.write_text(json.dumps(lazy.to_json()))
    back = load_law(str(p))
    assert np.array_equal(back.offsets, lazy.offsets) and np.array_equal(back.probs, lazy.probs)
    assert back.law_hash == lazy.law_hash
    doc = lazy.to_json()
    assert set(doc) >= {"offsets", "probs", "alpha", "rho"}
    with pytest.raises(FileNotFoundError):
        load_law(str(tmp_path / "missing.json"))


def test_draw_frequencies(lazy):
    g = np.random.default_rng(0)
    x = lazy.draw(200_000, g)
    for o, p in zip(lazy.offsets, lazy.probs):
        f = np.mean(x == o)
        assert abs(f - p) < 4 * np.sqrt(p * (1 - p) / x.size)


def test_sample_path_is_deterministic_per_stream(ssrw):
    a = sample_path(ssrw, 3, 50, Stream(7, 1))
    b = sample_path(ssrw, 3, 50, Stream(7, 1))
    c = sample_path(ssrw, 3, 50, Stream(7, 2))
    assert np.array_equal(a.values, b.values) and not np.array_equal(a.values, c.values)
    assert a.values[0] == 3 and np.all(np.abs(a.increments()) == 1)


def test_sample_paths_shape(lazy):
    out = sample_paths(lazy, 2, 10, 7, np.random.default_rng(1))
    assert out.shape == (7, 11) and np.all(out[:, 0] == 2)


def test_first_entrance(ssrw):
    p = sample_first_entrance(ssrw, 1, "nonpositive", 10_000_000, Stream(3))
    assert p.absorbed_at is not None and p.end == 0 and np.all(p.values[:-1] > 0)
    q = sample_first_entrance(ssrw, 5, "negative", 2, Stream(3))
    assert q.absorbed_at is None and q.n_steps == 2
    with pytest.raises(ValueError):
        sample_first_entrance(ssrw, 1, "sideways", 10, Stream(0))


def test_path_sample_start_must_match():
    with pytest.raises(ValueError):
        PathSample(1, [0, 1])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 20), min_size=3, max_size=6))
def test_random_laws_normalise(weights):
    offsets = list(range(-1, len(weights) - 1))
    probs = np.array(weights, dtype=float) / sum(weights)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MonotoneDriftWarning)
        law = make_step_law(offsets, probs)
    assert law.cdf[-1] == pytest.approx(1.0, abs=1e-12)
    assert law.dense.sum() == pytest.approx(1.0, abs=1e-12)
    assert law.aperiodic
