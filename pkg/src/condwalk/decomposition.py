"""Splitting the walk conditioned to stay nonnegative at its overall minimum.

Under ``P_y^+`` the overall minimum ``S_m`` equals ``x`` with probability
``W(y - x) / V(y)``.  Given ``S_m = x`` the path before ``m`` is the chain
that dies at zero started from ``y - x`` and shifted up by ``x``, and the
path after ``m`` is an independent copy of ``P_0^+`` shifted by ``x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import MaxStepsExceeded
from .kernel import FiniteLaw, die_at_zero_law
from .laws import PathSample, StepLaw
from .renewal import RenewalTable, renewal_table
from .rng import as_stream, chunk_sizes, concat, map_chunks
from .stats import chi2_sample
from .samplers import (HKernel, build_h_kernel, die_at_zero_kernel_for, die_at_zero_paths, grow_kernel,
                       plus_kernel_for, plus_paths)


def minimum_law(table: RenewalTable, y: int) -> FiniteLaw:
    """Law of the overall minimum under ``P_y^+``: ``W(y - x) / V(y)`` on ``0..y``."""
    if not 0 <= y <= table.grid_max:
        raise ValueError(f"y = {y} outside the table range")
    mass = table.W[y::-1][: y + 1] / table.V[y]
    return FiniteLaw(0, mass.copy(), 0, "minimum", survival=1.0)


def minimum_tail(table: RenewalTable, y: int, x) -> np.ndarray:
    """``P_y^+(S_m >= x) = V(y - x) / V(y)``."""
    x = np.asarray(x)
    return np.where(x <= 0, 1.0, np.where(x > y, 0.0, table.V[np.clip(y - x, 0, y)] / table.V[y]))


@dataclass
class MinimumSplit:
    """A trajectory cut at its first overall minimum.

    ``pre_path`` runs from ``y`` down to ``min_value`` in ``min_time`` steps
    and first touches its minimum at its last index; ``post_path`` is the
    nonnegative remainder, shifted so that it starts at 0.
    """

    min_value: int
    min_time: int
    pre_path: PathSample
    post_path: PathSample

    def joined(self) -> PathSample:
        vals = np.concatenate([self.pre_path.values, self.post_path.values[1:] + self.min_value])
        return PathSample(self.pre_path.start, vals)


def split_at_minimum(path: PathSample) -> MinimumSplit:
    """Cut a finite path at the first time it attains its minimum."""
    v = path.values
    m = int(np.argmin(v))
    x = int(v[m])
    return MinimumSplit(x, m, PathSample(int(v[0]), v[: m + 1]), PathSample(0, v[m:] - x))


def _tables(law: StepLaw, table: Optional[RenewalTable], top: int) -> RenewalTable:
    return table if table is not None and table.grid_max >= top else renewal_table(law, top)


def sample_minimum_split(law: StepLaw, table: Optional[RenewalTable], y: int, post_steps: int, stream, *,
                         max_steps: int = 1_000_000) -> MinimumSplit:
    """Draw ``(S_m, pre-minimum path, post_steps of the post-minimum path)``.

    The pre-minimum segment is a complete die-at-zero trajectory, so its
    length is only bounded by ``max_steps`` (:class:`MaxStepsExceeded`).
    """
    from .samplers import sample_die_at_zero, sample_plus

    s = as_stream(stream)
    table = _tables(law, table, y + 1)
    x = int(minimum_law(table, y).sample(1, s.gen)[0])
    dk = die_at_zero_kernel_for(law, y - x, 16, table)
    pre = sample_die_at_zero(dk, y - x, s, max_steps=max_steps)
    post = sample_plus(plus_kernel_for(law, 0, post_steps), 0, post_steps, s)
    pre_path = PathSample(y, pre.values + x)
    return MinimumSplit(x, pre.n_steps, pre_path, post)


def decomposition_paths(law: StepLaw, table: Optional[RenewalTable], y: int, n: int, size: int,
                        gen: np.random.Generator, record: bool = False) -> np.ndarray:
    """First ``n`` steps of ``size`` trajectories built from the minimum split.

    Only the first ``n`` steps of the pre-minimum chain are ever needed, so
    no step budget is involved and the law over ``0..n`` is exact.
    Returns endpoints ``S_n`` or, if ``record``, the ``(size, n + 1)`` paths.
    """
    table = _tables(law, table, y + n * max(law.max_step, 1) + 1)
    xs = minimum_law(table, y).sample(size, gen)
    out = np.empty((size, n + 1), dtype=np.int64) if record else np.empty(size, dtype=np.int64)
    pk = plus_kernel_for(law, 0, n, table)
    dk = die_at_zero_kernel_for(law, y, n, table)
    for x in np.unique(xs):
        idx = np.flatnonzero(xs == x)
        pre = die_at_zero_paths(dk, int(y - x), n, idx.size, gen, record=True)
        post = plus_paths(pk, 0, n, idx.size, gen, record=True)
        zeta = pre["zeta"]
        alive = zeta < 0
        if record:
            k = np.arange(n + 1)[None, :]
            lag = np.clip(k - np.where(alive, n + 1, zeta)[:, None], 0, n)
            after = ~alive[:, None] & (k >= zeta[:, None])
            out[idx] = x + np.where(after, np.take_along_axis(post, lag, axis=1), pre["paths"])
        else:
            rows = np.arange(idx.size)
            out[idx] = x + np.where(alive, pre["state"], post[rows, np.where(alive, 0, n - zeta)])
    return out


def sample_plus_by_decomposition(law: StepLaw, table: Optional[RenewalTable], y: int, n: int, stream) -> PathSample:
    s = as_stream(stream)
    vals = decomposition_paths(law, table, y, n, 1, s.gen, record=True)[0]
    return PathSample(int(y), vals, stream_id=s.stream_id, meta={"kind": "decomposition"})


def decomposition_endpoints(law: StepLaw, y: int, n: int, size: int, seed: int, *, base_id: int = 0,
                            table: Optional[RenewalTable] = None) -> np.ndarray:
    """Chunked, thread-count independent endpoint campaign for :func:`decomposition_paths`."""
    table = _tables(law, table, y + n * max(law.max_step, 1) + 1)
    parts = map_chunks(lambda k, st: decomposition_paths(law, table, y, n, k, st.gen), size, seed, base_id=base_id)
    return concat(parts)


def empirical_minimum_law(law: StepLaw, table: Optional[RenewalTable], y: int, size: int, gen: np.random.Generator,
                          horizon: int = 64) -> dict:
    """Estimate ``P_y^+(S_m = x)`` from plus-chain paths of length ``horizon``.

    The minimum after the horizon is integrated out exactly given ``S_horizon``
    (conditional expectation), so the estimator is unbiased.  Returns the
    per-atom mean and standard error.
    """
    table = _tables(law, table, y + horizon * max(law.max_step, 1) + 1)
    paths = plus_paths(plus_kernel_for(law, y, horizon, table), y, horizon, size, gen, record=True)
    run_min = paths.min(axis=1)
    end = paths[:, -1]
    xs = np.arange(y + 1)
    # P(overall min >= x | path) = 1{run_min >= x} V(end - x) / V(end)
    tail = (run_min[:, None] >= xs[None, :]) * table.V[np.maximum(end[:, None] - xs[None, :], 0)] / table.V[end][:, None]
    tail = np.concatenate([tail, np.zeros((size, 1))], axis=1)
    atoms = tail[:, :-1] - tail[:, 1:]
    return {"x": xs, "mean": atoms.mean(axis=0), "se": atoms.std(axis=0, ddof=1) / math.sqrt(size)}


def decomposition_splits(law: StepLaw, table: Optional[RenewalTable], y: int, size: int, gen: np.random.Generator,
                         *, max_steps: int = 1_000_000, stop_above: Optional[int] = None,
                         post_steps: int = 1) -> dict:
    """Vectorised minimum splits without the pre-minimum paths.

    For each draw returns ``x = S_m``, ``m`` (or -1 if the budget ran out),
    the pre-minimum running maximum, and the first ``post_steps`` increments
    of the post-minimum chain.  With ``stop_above`` a chain is frozen as soon
    as its pre-minimum maximum reaches that level, which is all that is
    needed to decide ``{sup_{k<=m} S_k >= stop_above}``; its ``m`` is then -2.
    """
    table = _tables(law, table, y + 1)
    xs = minimum_law(table, y).sample(size, gen).astype(np.int64)
    z = y - xs
    m = np.where(z == 0, 0, -1).astype(np.int64)
    top = z.copy()
    if stop_above is not None:
        m[xs + top >= stop_above] = -2  # includes m = 0 with S_0 already high
    kernel = die_at_zero_kernel_for(law, int(max(y, 1)), 64, None)
    steps = 0
    state = z.copy()
    while steps < max_steps:
        live = np.flatnonzero(m == -1)
        if live.size == 0:
            break
        steps += 1
        new = kernel.step(state[live], gen, check=False)
        if new.size and new.max() >= kernel.state_cap:
            kernel = grow_kernel(kernel, int(new.max()))
        state[live] = new
        top[live] = np.maximum(top[live], new)
        m[live[new == 0]] = steps
        if stop_above is not None:
            hit = live[(m[live] == -1) & (xs[live] + top[live] >= stop_above)]
            m[hit] = -2
    pk = plus_kernel_for(law, 0, post_steps, table)
    post = plus_paths(pk, 0, post_steps, size, gen, record=True)
    return {"x": xs, "m": m, "pre_max": xs + top, "post": post, "budget_hits": int(np.sum(m == -1))}


def pre_minimum_exact(law: StepLaw, table: Optional[RenewalTable], y: int, t: int) -> float:
    """Exact ``P_y^+(m >= t)`` from the minimum law and die-at-zero lifetimes."""
    if t <= 0:
        return 1.0
    table = _tables(law, table, y + t * max(law.max_step, 1) + 1)
    ml = minimum_law(table, y)
    acc = []
    for x, w in zip(ml.states, ml.mass):
        z = int(y - x)
        if w == 0 or z == 0:
            continue
        life = die_at_zero_law(law, table, z, t - 1).extras["lifetime_cdf"]
        acc.append(w * (1.0 - life[t - 1]))
    return math.fsum(acc)


def pre_minimum_smallness_check(law: StepLaw, N_grid, *, y_of_N: Callable[[int], int] = None, eps: float = 0.1,
                                samples: int = 100_000, seed: int = 0, norming=None,
                                max_steps: int = 1_000_000) -> dict:
    """Monte Carlo ``P_{y_N}^+(m >= eps N)`` and ``P_{y_N}^+(sup_{k<=m} S_k >= eps a_N)``.

    Rows also carry the exact value of the first probability, the bound
    ``V(y_N) / V(floor(eps a_N))`` on the second, and binomial standard
    errors.  The default ``y_N`` is ``floor(N ** 0.25)``.
    """
    from .scaling import norming_sequence

    a = norming if norming is not None else norming_sequence(law)
    y_of_N = y_of_N or (lambda N: int(math.floor(N ** 0.25 + 1e-12)))
    rows = []
    for i, N in enumerate(N_grid):
        y = int(y_of_N(N))
        aN = float(a(N))
        level = eps * aN
        t = int(math.ceil(eps * N))
        table = _tables(law, None, max(y, int(math.floor(level))) + 1)

        def chunk(k, st, y=y, t=t, level=level, table=table):
            sp = decomposition_splits(law, table, y, k, st.gen, max_steps=max(t, 1), post_steps=0)
            long_pre = (sp["m"] == -1) | (sp["m"] >= t)
            sp2 = decomposition_splits(law, table, y, k, st.gen, max_steps=max_steps,
                                       stop_above=int(math.ceil(level)), post_steps=0)
            high = sp2["m"] == -2
            return np.array([long_pre.sum(), high.sum(), sp2["budget_hits"]], dtype=np.int64)

        counts = np.sum(map_chunks(chunk, samples, seed, base_id=i << 20), axis=0)
        p_m, p_sup = counts[0] / samples, counts[1] / samples
        fl = int(math.floor(level))
        bound = min(1.0, table.V[y] / table.V[fl]) if fl >= 0 else 1.0
        rows.append({
            "N": int(N), "y": y, "a_N": aN, "eps": eps, "samples": int(samples),
            "p_long": float(p_m), "p_long_se": math.sqrt(p_m * (1 - p_m) / samples),
            "p_long_exact": pre_minimum_exact(law, table, y, t),
            "p_high": float(p_sup), "p_high_se": math.sqrt(p_sup * (1 - p_sup) / samples),
            "high_bound": float(bound), "budget_hits": int(counts[2]),
        })
    return {"law": law.name, "rows": rows}


def decomposition_agreement(law: StepLaw, ys, ns, *, samples: int = 1_000_000, seed: int = 0,
                            min_samples: Optional[int] = None, horizon: int = 64) -> dict:
    """Chi-square agreement of decomposition endpoints with the exact plus law,
    and Monte Carlo minimum-law atoms against ``W(y - x) / V(y)``.

    ``min_samples`` (default ``samples``) sets the size of the minimum-law
    campaign.  Everything is drawn from chunked streams, so the result is a
    pure function of the arguments.
    """
    from .kernel import plus_law

    min_samples = samples if min_samples is None else min_samples
    rows, mins = [], []
    for i, y in enumerate(ys):
        for j, n in enumerate(ns):
            e = decomposition_endpoints(law, int(y), int(n), samples, seed, base_id=((i << 8) + j) << 20)
            stat, p, dof = chi2_sample(e, plus_law(law, None, int(y), int(n)))
            rows.append({"y": int(y), "n": int(n), "chi2": stat, "p_value": p, "dof": dof})
        table = _tables(law, None, int(y) + horizon * max(law.max_step, 1) + 1)
        parts = map_chunks(lambda k, st, y=y: empirical_minimum_law(law, table, int(y), k, st.gen, horizon),
                           min_samples, seed, base_id=(1 << 40) + (i << 20))
        w = np.array(chunk_sizes(min_samples), dtype=float)
        mean = sum(p_["mean"] * k for p_, k in zip(parts, w)) / w.sum()
        var = sum(p_["se"] ** 2 * k * k for p_, k in zip(parts, w)) / w.sum() ** 2
        exact = minimum_law(table, int(y)).mass
        z = np.abs(mean - exact) / np.sqrt(var)
        mins.append({"y": int(y), "exact": exact, "empirical": mean, "se": np.sqrt(var), "max_z": float(z.max())})
    return {"law": law.name, "samples": int(samples), "seed": int(seed), "chi2": rows, "minimum": mins}
