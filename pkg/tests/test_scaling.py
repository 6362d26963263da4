import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from condwalk.errors import InsufficientSurvivors, UncalibratedLaw
from condwalk.kernel import survival_curve
from condwalk.laws import PathSample, make_step_law, named_law
from condwalk.renewal import renewal_table
from condwalk.scaling import (C3, constant_product_check, convergence_experiment, experiment_from_config,
                              limit_oracles, limit_renewal, maxwell_cdf, maxwell_pdf, norming_sequence,
                              rayleigh_cdf, rescale_path, rescaled_local, rescaled_renewal, stable_beta,
                              start_sequence, sup_convergence_check)
from condwalk.stats import ks_two_sample


def test_rescale_path_examples():
    r = rescale_path(PathSample(0, [0, 2]), 1, 2.0)
    assert r(1.0) == 1.0 and r(0.0) == 0.0
    c = rescale_path(PathSample(3, [3, 3, 3]), 2, 3.0)
    assert np.allclose(c([0, 0.5, 1.0]), 1.0)
    s = rescale_path(PathSample(0, [0, 1, 0, 1, 2]), 4, 2.0)
    assert s(1.0) == 1.0 and s(0.3) == 0.5
    with pytest.raises(ValueError):
        rescale_path(PathSample(0, [0]), 1, 0.0)
    with pytest.raises(ValueError):
        s(1.5)


def test_analytic_norming(ssrw, lazy):
    a = norming_sequence(ssrw)
    assert a.method == "analytic" and a(100) == 10.0
    assert norming_sequence(lazy)(200) == 10.0


def test_empirical_norming_for_zipf2():
    z = named_law("zipf2")
    a = norming_sequence(z, samples=2000)
    assert a.method == "empirical"
    grid = [64, 256, 1024, 4096]
    vals = [a(N) for N in grid]
    assert all(b > c for b, c in zip(vals[1:], vals[:-1]))
    assert all(0.5 <= v / N <= 2.0 for v, N in zip(vals, grid))


def test_uncalibrated_law():
    law = make_step_law([-1, 2], [2 / 3, 1 / 3], alpha=1.5)
    with pytest.raises(UncalibratedLaw):
        norming_sequence(law)
    with pytest.raises(UncalibratedLaw):
        stable_beta(1.0, 0.3)
    assert stable_beta(1.5, 0.5) == 0.0


def test_rescaled_renewal(ssrw, lazy):
    t = renewal_table(ssrw, 400)
    N, surv = 256, float(survival_curve(ssrw, 256)[-1])
    x = np.linspace(0, 2, 41)
    assert np.allclose(rescaled_renewal(t, surv, 16.0, x), surv * (np.floor(16 * x + 1e-12) + 1))
    assert rescaled_renewal(t, surv, 16.0, 0.0) == surv
    for law in (ssrw, lazy):
        tt = renewal_table(law, 100)
        assert np.allclose(rescaled_local(tt, 10.0, np.linspace(0.1, 5, 20)), 1.0)


def test_oracles():
    o = limit_oracles()
    assert set(o) == {"rayleigh-meander", "maxwell-plus", "two-sample-self"}
    assert rayleigh_cdf(0.0) == 0.0 and maxwell_cdf(0.0) == 0.0
    xs = np.linspace(0, 10, 500)
    for cdf in (rayleigh_cdf, maxwell_cdf):
        v = cdf(xs)
        assert np.all(np.diff(v) >= 0) and v[-1] == pytest.approx(1.0, abs=1e-12)
    mean, _ = integrate.quad(lambda x: x * maxwell_pdf(x), 0, np.inf, epsabs=1e-13)
    assert mean == pytest.approx(2 * math.sqrt(2 / math.pi), abs=1e-9)
    # Maxwell density = U(x) times the Rayleigh density
    for x in (0.3, 1.0, 2.5):
        assert maxwell_pdf(x) == pytest.approx(limit_renewal(x) * x * math.exp(-x * x / 2), rel=1e-14)
    # the meander endpoint mean E[Rayleigh] = sqrt(pi / 2) normalises C3
    assert C3 * math.sqrt(math.pi / 2) == pytest.approx(1.0)
    assert o["maxwell-plus"].applies_to(named_law("lazy"))
    assert not o["maxwell-plus"].applies_to(named_law("zipf2", K=100))


def test_constant_product(ssrw):
    r = constant_product_check(ssrw, [2 ** 10, 2 ** 12, 2 ** 14])
    prods = [row["product"] for row in r["rows"]]
    # SSRW: P(C_N) = C(N, N/2) / 2^N, V(sqrt N) = sqrt N + 1
    for row in r["rows"]:
        N = row["N"]
        exact = math.exp(math.lgamma(N + 1) - 2 * math.lgamma(N / 2 + 1) - N * math.log(2))
        assert row["survival"] == pytest.approx(exact, rel=1e-10)
        assert row["product"] == pytest.approx(exact * (math.isqrt(N) + 1), rel=1e-10)
    assert abs(prods[-1] - C3) < 0.03 * C3


def test_sup_check(ssrw):
    sc = sup_convergence_check(ssrw, 2 ** 12)
    assert sc["consistent"] and sc["sup"] <= sc["bound"]
    assert sc["sup"] >= survival_curve(ssrw, 2 ** 12)[-1] - 1e-15  # the value at x = 0
    big = sup_convergence_check(ssrw, 2 ** 14)
    assert big["sup"] < sc["sup"] and big["sup"] < 0.05


def test_start_sequence():
    assert start_sequence({"const": 1.5})(100) == 1.5
    assert start_sequence({"power": 0.5})(100) == pytest.approx(0.1)
    assert start_sequence({"const": 1, "power": 0.25})(16) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        start_sequence({"slope": 1})


def test_meander_experiment_shapes(lazy):
    r = convergence_experiment("meander", lazy, [16, 64], samples=20_000, seed=3, oracle="rayleigh")
    assert [row["N"] for row in r.rows] == [16, 64]
    assert r.ks[1] < r.ks[0]
    for x in r.endpoints.values():
        assert np.all(x >= 0)
    for row in r.rows:
        assert 0 <= row["survival"] <= 1 and row["ks"] >= 0


def test_experiment_errors(lazy):
    with pytest.raises(ValueError):
        convergence_experiment("sideways", lazy, [16])
    with pytest.raises(ValueError):
        convergence_experiment("plus", lazy, [16], oracle="two-sample")
    with pytest.raises(InsufficientSurvivors):
        convergence_experiment("plus", lazy, [16], samples=100, oracle="maxwell")


def test_die_at_zero_experiment_conditions_on_survival(lazy):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        r = convergence_experiment("die-at-zero", lazy, [64], xN={"const": 1}, samples=5000, seed=1)
    row = r.rows[0]
    assert row["samples"] == 5000 and 0 < row["survival"] < 1
    assert np.all(r.endpoints[64] > 0)


def test_plus_continuity_in_start(lazy):
    # shifting x_N by N^{-1/4} moves the endpoint law by a vanishing amount
    gaps = []
    for N in (64, 4096):
        a = convergence_experiment("plus", lazy, [N], xN={"const": 1.0}, samples=40_000, seed=4)
        b = convergence_experiment("plus", lazy, [N], xN={"const": 1.0, "power": 0.25}, samples=40_000, seed=5)
        gaps.append(ks_two_sample(a.endpoints[N], b.endpoints[N]))
    assert gaps[1] < 0.6 * gaps[0]


def test_report_files_are_reproducible(tmp_path, lazy):
    cfg = {"kind": "plus", "law": "lazy", "xN": {"const": 0}, "Ngrid": [16, 32], "samples": 2000, "seed": 9,
           "oracle": "maxwell"}
    p1 = experiment_from_config(cfg).write(tmp_path / "a")
    p2 = experiment_from_config(cfg).write(tmp_path / "b")
    assert [p.name for p in p1] == [p.name for p in p2]
    for x, y in zip(p1, p2):
        assert x.read_bytes() == y.read_bytes()
    head = p1[0].read_text().splitlines()[0]
    assert "config_hash=" in head and "version=" in head
    tsv = p1[2].read_text().splitlines()
    assert tsv[1] == "x\tecdf\toracle_cdf" and len(tsv) == 203
