import itertools
import math
from math import comb

import numpy as np
import pytest

from condwalk.errors import ZeroHarmonic
from condwalk.kernel import (FiniteLaw, die_at_zero_law, harmonicity_check, killed_law, meander_law,
                             meander_plus_duality_check, plus_chain_law, plus_law, survival_curve)
from condwalk.laws import named_law
from condwalk.renewal import renewal_table


def _enumerate(law, start, N, floor):
    """Brute-force killed law over all N-step paths."""
    out = {}
    for steps in itertools.product(range(law.offsets.size), repeat=N):
        s = start + np.cumsum(law.offsets[list(steps)])
        if np.all(s >= floor):
            w = math.prod(law.probs[list(steps)])
            out[int(s[-1])] = out.get(int(s[-1]), 0.0) + w
    return out


@pytest.mark.parametrize("name", ["ssrw", "lazy"])
@pytest.mark.parametrize("boundary,floor", [("weak", 0), ("strict", 1)])
def test_killed_law_matches_enumeration(name, boundary, floor):
    law = named_law(name)
    for start in (0, 2):
        for N in (1, 4, 7):
            got = killed_law(law, start, N, boundary).as_dict()
            want = _enumerate(law, start, N, floor)
            assert set(got) == {k for k, v in want.items() if v > 0}
            for k, v in want.items():
                assert got[k] == pytest.approx(v, abs=1e-15)


def test_survival_matches_ballot_formula(ssrw):
    # P(S_1..S_2k >= 0) = C(2k, k) / 4^k
    curve = survival_curve(ssrw, 20)
    for k in range(1, 11):
        assert curve[2 * k] == pytest.approx(comb(2 * k, k) / 4 ** k, rel=1e-13)
        assert curve[2 * k - 1] == pytest.approx(curve[2 * k], rel=1e-13)


def test_small_examples(ssrw, lazy):
    assert killed_law(ssrw, 0, 1).as_dict() == {1: 0.5}
    assert plus_law(ssrw, None, 0, 2).as_dict() == pytest.approx({0: 0.25, 2: 0.75})
    assert plus_law(ssrw, None, 0, 1).as_dict() == {1: 1.0}
    m = meander_law(lazy, 1)
    assert m.as_dict() == pytest.approx({0: 2 / 3, 1: 1 / 3})
    assert m.survival == 0.75
    assert killed_law(ssrw, 4, 0).as_dict() == {4: 1.0}


def test_plus_law_has_unit_mass_without_renormalisation(ssrw, lazy, down2):
    for law in (ssrw, lazy, down2):
        t = renewal_table(law, 10 + 64 * law.max_step + 1)
        for start in (0, 3, 10):
            for N in (1, 16, 64):
                assert abs(plus_law(law, t, start, N).total - 1.0) <= 1e-10


def test_plus_law_matches_doob_chain(lazy, down2):
    for law in (lazy, down2):
        t = renewal_table(law, 60)
        for start in (0, 2):
            a = plus_law(law, t, start, 12)
            b = plus_chain_law(law, t, start, 12)
            assert max(abs(a[z] - b[z]) for z in range(0, 40)) < 1e-14


def test_die_at_zero_examples(ssrw, lazy):
    f = die_at_zero_law(ssrw, None, 1, 1)
    assert f.as_dict() == {2: 0.5} and f.absorbed_mass == 0.5
    zero = die_at_zero_law(lazy, None, 0, 5)
    assert zero.total == 0.0 and zero.absorbed_mass == 1.0
    g = die_at_zero_law(lazy, None, 1, 1)
    assert g.as_dict() == {1: 0.5, 2: 0.25} and g.absorbed_mass == 0.25


def test_die_at_zero_ssrw_lifetime_is_odd_from_one(ssrw):
    life = die_at_zero_law(ssrw, None, 1, 15).extras["lifetime_cdf"]
    jumps = np.diff(life)
    assert np.all(jumps[1::2] == 0)  # no absorption at even times
    assert jumps[0] == 0.5
    # first passage to 0 of SSRW from 1 at time 2k+1: Catalan(k) / 2^(2k+1)
    for k in range(7):
        cat = comb(2 * k, k) // (k + 1)
        assert jumps[2 * k] == pytest.approx(cat / 2 ** (2 * k + 1), rel=1e-13)


def test_die_at_zero_mass_balance(lazy, down2):
    for law in (lazy, down2):
        t = renewal_table(law, 200)
        for y in (1, 4, 9):
            for N in (1, 8, 30):
                f = die_at_zero_law(law, t, y, N)
                assert abs(f.total + f.absorbed_mass - 1.0) <= 1e-12


def test_die_at_zero_rejects_zero_harmonic_start():
    law = named_law("ssrw-periodic")
    with pytest.raises(ZeroHarmonic):
        die_at_zero_law(law, None, 1, 3)
    assert die_at_zero_law(law, None, 2, 3).total + die_at_zero_law(law, None, 2, 3).absorbed_mass == \
        pytest.approx(1.0, abs=1e-12)


def test_harmonicity_residuals(ssrw, lazy, down2):
    for law in (ssrw, lazy, down2):
        r = harmonicity_check(law, None, 20, 6)
        assert r["weak"] <= 1e-10 and r["strict"] <= 1e-10


def test_duality(ssrw, lazy):
    for law in (ssrw, lazy):
        assert meander_plus_duality_check(law, None, 9)["max_residual"] <= 1e-12
        r = meander_plus_duality_check(law, None, 6, "cylinder")
        assert r["max_residual"] <= 1e-12 and r["events"] > 6
    with pytest.raises(ValueError):
        meander_plus_duality_check(ssrw, None, 13, "cylinder")


def test_finite_law_cdf_and_sampling(lazy):
    f = meander_law(lazy, 6)
    assert f.cdf(-0.5) == 0.0 and f.cdf(1e9) == 1.0
    assert f.cdf(2.5) == pytest.approx(sum(f.normalized()[:3]))
    assert f.cdf_left(2.0) == pytest.approx(f.cdf(1.0))
    x = f.sample(100_000, np.random.default_rng(0))
    for z, p in f.as_dict().items():
        assert abs(np.mean(x == z) - p) < 5 * math.sqrt(p * (1 - p) / x.size) + 1e-9


def test_finite_law_csv_round_trip(tmp_path, ssrw):
    f = plus_law(ssrw, None, 2, 5)
    p = tmp_path / "law.csv"
    text = f.to_csv(p)
    assert text.splitlines()[1] == "state,mass"
    back = FiniteLaw.from_csv(p)
    assert back.kind == "plus" and back.horizon == 5
    assert np.array_equal(back.mass, f.mass) and back.offset == f.offset
