"""Estimator-style wrappers around the functional core.

Each class follows the scikit-learn conventions: hyperparameters are set
in ``__init__`` and exposed through ``get_params``; ``fit`` takes a step law
(object, built-in name, JSON path or dictionary) and stores fitted state in
attributes with a trailing underscore.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import kernel as _kernel
from . import samplers as _samplers
from ._validation import check_count, check_grid, check_states, check_step_law
from .decomposition import decomposition_endpoints, minimum_law
from .renewal import EPS_TAIL, renewal_table
from .rng import concat, map_chunks
from .scaling import convergence_experiment, norming_sequence


class RenewalFunction(BaseEstimator):
    """Renewal function ``V`` and local increments ``W`` of the descending ladder.

    Examples
    --------
    >>> RenewalFunction(y_max=5).fit("ssrw").transform([0, 5])
    array([1., 6.])
    """

    def __init__(self, y_max: int = 200, eps_tail: float = EPS_TAIL, method: str = "wiener-hopf"):
        self.y_max = y_max
        self.eps_tail = eps_tail
        self.method = method

    def fit(self, X, y=None):
        self.law_ = check_step_law(X)
        self.table_ = renewal_table(self.law_, check_count(self.y_max, "y_max"), self.eps_tail, method=self.method)
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "table_")
        return self.table_.v(check_states(X)).astype(float)

    predict = transform

    def local(self, X) -> np.ndarray:
        check_is_fitted(self, "table_")
        return self.table_.w(check_states(X)).astype(float)


class ConditionedWalk(BaseEstimator):
    """Exact laws and samplers of the walk conditioned to stay nonnegative
    (``kind="plus"``), to die at zero (``"die-at-zero"``), or of the meander.

    ``sampler="decomposition"`` draws plus-chain endpoints through the split
    at the overall minimum instead of the one-step kernel.
    """

    def __init__(self, kind: str = "plus", start: int = 0, n_steps: int = 1, seed: int = 0,
                 sampler: str = "kernel"):
        self.kind = kind
        self.start = start
        self.n_steps = n_steps
        self.seed = seed
        self.sampler = sampler

    def fit(self, X, y=None):
        if self.kind not in ("plus", "die-at-zero", "meander"):
            raise ValueError(f"unknown kind {self.kind!r}")
        self.law_ = check_step_law(X)
        start = check_count(self.start, "start")
        n = check_count(self.n_steps, "n_steps")
        top = start + n * max(self.law_.max_step, 1) + 1
        self.table_ = renewal_table(self.law_, top)
        if self.kind == "plus":
            self.law_at_n_ = _kernel.plus_law(self.law_, self.table_, start, n)
            self.kernel_ = _samplers.plus_kernel_for(self.law_, start, n, self.table_)
        elif self.kind == "die-at-zero":
            self.law_at_n_ = _kernel.die_at_zero_law(self.law_, self.table_, start, n)
            self.kernel_ = _samplers.die_at_zero_kernel_for(self.law_, start, n, self.table_)
        else:
            self.law_at_n_ = _kernel.meander_law(self.law_, n, start)
            self.kernel_ = None
        return self

    def sample(self, size: int) -> np.ndarray:
        """Endpoints ``S_n`` of ``size`` independent runs (0 once absorbed)."""
        check_is_fitted(self, "law_at_n_")
        size = check_count(size, "size", 1)
        law, start, n = self.law_, int(self.start), int(self.n_steps)
        if self.kind == "plus" and self.sampler == "decomposition":
            return decomposition_endpoints(law, start, n, size, self.seed, table=self.table_)
        if self.kind == "plus":
            fn = lambda k, st: _samplers.plus_paths(self.kernel_, start, n, k, st.gen)
        elif self.kind == "die-at-zero":
            fn = lambda k, st: _samplers.die_at_zero_paths(self.kernel_, start, n, k, st.gen)["state"]
        else:
            fn = lambda k, st: self.law_at_n_.sample(k, st.gen)
        return concat(map_chunks(fn, size, self.seed))

    def predict_proba(self, X) -> np.ndarray:
        """Exact probabilities of the states ``X`` at step ``n``."""
        check_is_fitted(self, "law_at_n_")
        return np.array([self.law_at_n_[int(z)] for z in np.atleast_1d(X)])

    def minimum_law(self):
        check_is_fitted(self, "table_")
        return minimum_law(self.table_, int(self.start))


class NormingEstimator(BaseEstimator):
    """Norming sequence ``a_N``; analytic for finite variance, calibrated otherwise."""

    def __init__(self, samples: int = 4000, seed: int = 0):
        self.samples = samples
        self.seed = seed

    def fit(self, X, y=None):
        self.law_ = check_step_law(X)
        self.sequence_ = norming_sequence(self.law_, samples=check_count(self.samples, "samples", 1), seed=self.seed)
        self.method_ = self.sequence_.method
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "sequence_")
        return np.array([self.sequence_(int(N)) for N in np.atleast_1d(X)])

    predict = transform


class ConvergenceExperiment(BaseEstimator):
    """Rescaled endpoint laws along an ``N`` grid compared with a limit oracle.

    ``score`` returns minus the Kolmogorov-Smirnov distance at the largest
    ``N``, so larger is better.
    """

    def __init__(self, kind: str = "meander", Ngrid=(64, 256, 1024, 4096), xN=None, samples: int = 100_000,
                 seed: int = 0, oracle=None, paired_law=None):
        self.kind = kind
        self.Ngrid = Ngrid
        self.xN = xN
        self.samples = samples
        self.seed = seed
        self.oracle = oracle
        self.paired_law = paired_law

    def fit(self, X, y=None):
        self.report_ = convergence_experiment(self.kind, check_step_law(X), check_grid(self.Ngrid), xN=self.xN,
                                              samples=check_count(self.samples, "samples", 1), seed=self.seed,
                                              oracle=self.oracle, paired_law=self.paired_law)
        self.ks_ = self.report_.ks
        return self

    def score(self, X=None, y=None) -> float:
        check_is_fitted(self, "report_")
        return -float(self.ks_[-1])
