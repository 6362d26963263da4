"""Empirical CDFs, Kolmogorov-Smirnov, lattice chi-square and total variation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import stats as _st

from .errors import DegenerateBins


@dataclass(frozen=True)
class Ecdf:
    """Right-continuous empirical distribution function of a real sample."""

    values: np.ndarray

    @classmethod
    def of(cls, sample) -> "Ecdf":
        v = np.sort(np.asarray(sample, dtype=float).ravel())
        if v.size == 0:
            raise ValueError("empty sample")
        return cls(v)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __call__(self, x):
        return np.searchsorted(self.values, np.asarray(x, dtype=float), side="right") / self.n


def ks_one_sample(sample, cdf: Callable, cdf_left: Optional[Callable] = None) -> float:
    """Kolmogorov-Smirnov distance between a sample and a CDF.

    Both one-sided gaps are evaluated at the sample points.  For a CDF with
    atoms pass ``cdf_left(x) = F(x-)``; the default assumes continuity.
    """
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    F = np.asarray(cdf(x), dtype=float)
    F_left = F if cdf_left is None else np.asarray(cdf_left(x), dtype=float)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - F)
    d_minus = np.max(F_left - (i - 1) / n)
    return float(max(d_plus, d_minus, 0.0))


def ks_two_sample(a, b) -> float:
    """Largest gap between two empirical CDFs, evaluated on the merged sample."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_pvalue(d: float, n: int, m: Optional[int] = None) -> float:
    """Asymptotic Kolmogorov tail probability for a one- or two-sample statistic."""
    n_eff = n if m is None else n * m / (n + m)
    return float(_st.kstwobign.sf(d * math.sqrt(n_eff)))


def ks_critical(n: int, m: Optional[int] = None, level: float = 0.001) -> float:
    n_eff = n if m is None else n * m / (n + m)
    return float(_st.kstwobign.isf(level) / math.sqrt(n_eff))


def lattice_counts(sample, offset: int, size: int) -> np.ndarray:
    """Histogram of integer values on ``offset..offset+size-1``; outliers raise."""
    s = np.asarray(sample, dtype=np.int64).ravel() - offset
    if s.size and (s.min() < 0 or s.max() >= size):
        raise ValueError("sample falls outside the lattice support")
    return np.bincount(s, minlength=size)


def _merge_bins(counts: np.ndarray, expected: np.ndarray, min_bin: float):
    # sweep left to right, closing a bin once its expected count reaches min_bin
    c_out, e_out = [], []
    c_acc = e_acc = 0.0
    for c, e in zip(counts, expected):
        c_acc += c
        e_acc += e
        if e_acc >= min_bin:
            c_out.append(c_acc)
            e_out.append(e_acc)
            c_acc = e_acc = 0.0
    if e_acc > 0 or c_acc > 0:
        if e_out:
            c_out[-1] += c_acc
            e_out[-1] += e_acc
        else:
            c_out.append(c_acc)
            e_out.append(e_acc)
    return np.array(c_out), np.array(e_out)


def chi2_lattice(counts, expected, min_bin: float = 5.0) -> tuple[float, float, int]:
    """Pearson chi-square of lattice counts against a law.

    ``expected`` is a probability vector aligned with ``counts`` (or a
    :class:`~condwalk.kernel.FiniteLaw`, in which case ``counts`` must be
    aligned with its states).  Adjacent bins are merged until each expected
    count reaches ``min_bin``.  Returns ``(statistic, p_value, dof)``.
    """
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(getattr(expected, "mass", expected), dtype=float)
    if probs.shape != counts.shape:
        raise ValueError("counts and expected must be aligned")
    n = counts.sum()
    probs = probs / probs.sum()
    c, e = _merge_bins(counts, n * probs, min_bin)
    if c.size < 2:
        raise DegenerateBins(f"only {c.size} bin(s) left after merging")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(e > 0, (c - e) ** 2 / e, np.where(c > 0, np.inf, 0.0))
    stat = float(terms.sum())
    dof = int(c.size - 1)
    return stat, float(_st.chi2.sf(stat, dof)), dof


def chi2_sample(sample, law, min_bin: float = 5.0) -> tuple[float, float, int]:
    """:func:`chi2_lattice` for an integer sample against a FiniteLaw."""
    sample = np.asarray(sample, dtype=np.int64)
    lo = min(int(sample.min()), law.offset)
    hi = max(int(sample.max()), law.offset + law.mass.size - 1)
    counts = lattice_counts(sample, lo, hi - lo + 1)
    probs = np.zeros(hi - lo + 1)
    probs[law.offset - lo: law.offset - lo + law.mass.size] = law.mass
    return chi2_lattice(counts, probs, min_bin)


def _as_map(p) -> dict:
    if isinstance(p, dict):
        return p
    return {int(z): float(m) for z, m in zip(p.states, p.mass)}


def total_variation(p, q) -> float:
    """Half the L1 distance between two laws (FiniteLaw or ``{state: mass}``)."""
    p, q = _as_map(p), _as_map(q)
    keys = set(p) | set(q)
    return 0.5 * math.fsum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def empirical_law(sample) -> dict:
    vals, cnt = np.unique(np.asarray(sample, dtype=np.int64), return_counts=True)
    return {int(v): c / cnt.sum() for v, c in zip(vals, cnt)}
