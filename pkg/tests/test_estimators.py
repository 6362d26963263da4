import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from condwalk.estimators import ConditionedWalk, ConvergenceExperiment, NormingEstimator, RenewalFunction


def test_renewal_function_estimator():
    est = RenewalFunction(y_max=5)
    assert est.get_params() == {"y_max": 5, "eps_tail": 1e-12, "method": "wiener-hopf"}
    with pytest.raises(NotFittedError):
        est.transform([1])
    assert est.fit("ssrw") is est
    assert np.array_equal(est.transform([0, 5]), [1.0, 6.0])
    assert np.array_equal(est.local([0, 3]), [1.0, 1.0])
    with pytest.raises(ValueError):
        est.transform([-1])
    c = clone(est).set_params(y_max=7)
    assert c.y_max == 7 and not hasattr(c, "table_")


def test_conditioned_walk_estimator():
    w = ConditionedWalk(kind="plus", start=0, n_steps=2, seed=3).fit("ssrw")
    assert w.predict_proba([0, 1, 2]) == pytest.approx([0.25, 0.0, 0.75])
    x = w.sample(20_000)
    assert abs(np.mean(x == 2) - 0.75) < 0.02
    d = ConditionedWalk(kind="plus", start=3, n_steps=8, seed=3, sampler="decomposition").fit("lazy")
    assert d.sample(1000).min() >= 0
    z = ConditionedWalk(kind="die-at-zero", start=1, n_steps=1).fit("ssrw")
    assert set(np.unique(z.sample(2000))) <= {0, 2}
    m = ConditionedWalk(kind="meander", n_steps=1).fit("lazy")
    assert m.predict_proba([0, 1]) == pytest.approx([2 / 3, 1 / 3])
    assert ConditionedWalk(start=2).fit("ssrw").minimum_law().mass == pytest.approx([1 / 3] * 3)
    with pytest.raises(ValueError):
        ConditionedWalk(kind="bogus").fit("ssrw")
    with pytest.raises(ValueError):
        ConditionedWalk(start=-1).fit("ssrw")


def test_norming_estimator():
    n = NormingEstimator().fit("lazy")
    assert n.method_ == "analytic"
    assert n.transform([2, 8]) == pytest.approx([1.0, 2.0])


def test_convergence_experiment_estimator():
    e = ConvergenceExperiment(kind="meander", Ngrid=[16, 64], samples=5000, oracle="rayleigh").fit("lazy")
    assert e.score() == -e.ks_[-1]
    with pytest.raises(ValueError):
        ConvergenceExperiment(Ngrid=[64, 16]).fit("lazy")
