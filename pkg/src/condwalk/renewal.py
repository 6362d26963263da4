"""Strict descending ladder variables and the renewal functions V and W.

``V(y) = sum_k P(H_k <= y)`` counts ladder points of height at most ``y``
and ``W(y) = V(y) - V(y-1)`` is the renewal mass function, with the
convention ``W(0) = V(0) = 1``.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from ._dp import KilledDP
from ._io import atomic_write as _atomic_write
from .errors import StateOverflow, TruncationFailure
from .laws import PathSample, StepLaw

EPS_TAIL = 1e-12
MAX_POLY_DEGREE = 4000


@dataclass(frozen=True)
class LadderRecord:
    epochs: np.ndarray
    heights: np.ndarray

    def __len__(self):
        return self.epochs.size


def extract_ladders(path) -> LadderRecord:
    """Strict descending ladder epochs and heights realised along ``path``.

    >>> extract_ladders([0, 1, 0, -1, -2]).epochs.tolist()
    [0, 3, 4]
    """
    values = path.values if isinstance(path, PathSample) else np.asarray(path, dtype=np.int64)
    if values.size == 0 or values[0] != 0:
        raise ValueError("ladder extraction needs a path started at 0")
    neg = -values
    # a ladder epoch is a strict new maximum of -S (index 0 included)
    prev_max = np.maximum.accumulate(neg)
    is_new = np.empty(values.size, dtype=bool)
    is_new[0] = True
    is_new[1:] = neg[1:] > prev_max[:-1]
    epochs = np.flatnonzero(is_new)
    return LadderRecord(epochs=epochs, heights=neg[epochs])


def _drift_exponent(law: StepLaw) -> float:
    """Positive root ``g`` of ``E exp(-g X) = 1`` (0 unless the mean is positive)."""
    if law.mean <= 0:
        return 0.0
    f = lambda g: float(np.dot(law.probs, np.exp(-g * law.offsets))) - 1.0
    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    return brentq(f, 1e-12, hi, xtol=1e-14)


def _ladder_pmf_absorption(law: StepLaw, eps_tail: float, max_iter: int) -> tuple[np.ndarray, float]:
    # walk kept on states >= 0; mass leaving below 0 is binned by exit depth.
    # remaining absorbable mass is bounded by sum_x q(x) exp(-g (x + 1)),
    # which is the total mass when the walk has no positive drift.
    d = -law.min_step
    g = _drift_exponent(law)
    dp = KilledDP(law, 0, 0)
    pmf = np.zeros(d + 1)
    for _ in range(max_iter):
        full = np.convolve(dp.mass, law.dense)
        pmf[1:] += full[:d][::-1]
        dp.mass = full[d:]
        bound = float(np.dot(dp.mass, np.exp(-g * (np.arange(dp.mass.size) + 1.0))))
        if bound <= eps_tail:
            return pmf[1:], bound
    raise TruncationFailure(
        f"un-absorbed mass bound {bound:.3g} still above {eps_tail:g} after {max_iter} steps; "
        "ladder epochs have a slow tail (use method='wiener-hopf' or raise max_iter)"
    )


def _deflate_unit_root(c: np.ndarray) -> np.ndarray:
    # synthetic division of the polynomial (highest degree first) by (z - 1)
    q = np.empty(c.size - 1)
    acc = 0.0
    for i in range(c.size - 1):
        acc = acc + c[i]
        q[i] = acc
    return q


def _polish(roots: np.ndarray, c: np.ndarray, n_iter: int = 3) -> np.ndarray:
    dc = np.polyder(c)
    r = roots.astype(complex)
    for _ in range(n_iter):
        step = np.polyval(c, r) / np.polyval(dc, r)
        r = r - np.where(np.isfinite(step), step, 0)
    return r


def _ladder_pmf_wiener_hopf(law: StepLaw) -> np.ndarray:
    # 1 - E z^X = (1 - weak ascending factor)(1 - E[z^-H; T < inf]); the
    # descending factor is a degree-d polynomial in 1/z whose zeros are the
    # zeros of z^d (E z^X - 1) inside the unit disk, plus z = 1 when the
    # walk does not drift to +inf.
    g = int(np.gcd.reduce(law.offsets))
    offs = law.offsets // g
    d = -int(offs[0])
    u = int(offs[-1])
    if d + u > MAX_POLY_DEGREE:
        raise TruncationFailure(
            f"support span {d + u} too wide for the exact factorization (limit {MAX_POLY_DEGREE}); "
            "truncate the law further"
        )
    coef = np.zeros(d + u + 1)  # ascending powers
    coef[offs + d] = law.probs
    coef[d] -= 1.0
    c = coef[::-1].copy()
    mean = law.mean / g
    unit = 0
    n_div = 2 if abs(mean) <= 1e-12 else 1
    for _ in range(n_div):
        c = _deflate_unit_root(c)
    if mean <= 1e-12:
        unit = 1
    inside = np.empty(0, dtype=complex)
    if c.size > 1:
        r = _polish(np.roots(c), c)
        inside = r[np.abs(r) < 1.0 - 1e-9]
    want = d - unit
    if inside.size != want:
        raise TruncationFailure(
            f"found {inside.size} roots inside the unit disk, expected {want}; "
            "the factorization is ill-conditioned for this law"
        )
    roots = np.concatenate([np.ones(unit, dtype=complex), inside])
    monic = np.poly(roots) if roots.size else np.ones(1)
    f = -np.real(monic[1:])
    out = np.zeros(d * g)
    out[g - 1 :: g] = f
    return out


def ladder_height_law(law: StepLaw, h_max: Optional[int] = None, eps_tail: float = EPS_TAIL, *,
                      method: str = "wiener-hopf", max_iter: int = 200_000) -> tuple[np.ndarray, float]:
    """pmf of the first strict descending ladder height ``H_1``.

    Returns ``(pmf, tail)`` where ``pmf[j - 1] = P(H_1 = j, T_1 < inf)`` for
    ``j = 1..h_max`` and ``tail`` bounds the missing mass.  With bounded-below
    support ``h_max`` is the largest downward jump.

    Parameters
    ----------
    method : {"wiener-hopf", "absorption"}
        ``"absorption"`` evolves the walk kept above 0 and bins exit mass by
        depth until the remaining absorbable mass is below ``eps_tail``.  It
        converges geometrically for walks drifting to ``+inf`` but only like
        ``n^(-1/2)`` for oscillating ones, in which case it raises
        :class:`TruncationFailure`.  ``"wiener-hopf"`` reads the same pmf off
        the root factorization of ``1 - E z^X`` and is exact to rounding.
    """
    d = -law.min_step
    if method == "absorption":
        pmf, tail = _ladder_pmf_absorption(law, eps_tail, max_iter)
    elif method == "wiener-hopf":
        pmf, tail = _ladder_pmf_wiener_hopf(law), 0.0
    else:
        raise ValueError(f"unknown method {method!r}")
    pmf = np.clip(pmf, 0.0, None)
    if h_max is not None:
        if h_max < d:
            tail += float(pmf[h_max:].sum())
        pmf = np.pad(pmf, (0, max(0, h_max - d)))[:h_max]
    return pmf, tail


@dataclass(frozen=True)
class RenewalTable:
    """``V`` and ``W`` on ``0..grid_max`` together with the ``H_1`` pmf."""

    grid_max: int
    V: np.ndarray
    W: np.ndarray
    h1_law: np.ndarray
    eps_tail: float
    method: str
    law_hash: str = ""

    def covers(self, y: int) -> bool:
        return 0 <= y <= self.grid_max

    def _lookup(self, arr, y):
        y = np.asarray(y)
        yi = np.floor(y).astype(np.int64)
        if np.any(yi > self.grid_max):
            raise StateOverflow(f"renewal table stops at {self.grid_max}, asked for {int(yi.max())}")
        out = np.zeros(yi.shape)
        ok = yi >= 0
        out[ok] = arr[yi[ok]]
        return out

    def v(self, y):
        """Right-continuous ``V`` (``V(y) = V(floor y)``, zero for ``y < 0``)."""
        return self._lookup(self.V, y)

    def w(self, y):
        return self._lookup(self.W, y)

    def to_csv(self, path=None, header: Optional[dict] = None) -> str:
        buf = io.StringIO()
        for k, v in (header or {}).items():
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["y", "V", "W"])
        for y in range(self.grid_max + 1):
            w.writerow([y, repr(float(self.V[y])), repr(float(self.W[y]))])
        text = buf.getvalue()
        if path is not None:
            _atomic_write(Path(path), text)
        return text

    @classmethod
    def from_csv(cls, path) -> "RenewalTable":
        rows = [r for r in Path(path).read_text().splitlines() if r and not r.startswith("#")]
        data = np.array([[float(x) for x in r.split(",")] for r in rows[1:]])
        V, W = data[:, 1], data[:, 2]
        return cls(grid_max=len(V) - 1, V=V, W=W, h1_law=np.empty(0), eps_tail=float("nan"), method="csv")


def renewal_table(law: StepLaw, y_max: int, eps_tail: float = EPS_TAIL, *, method: str = "wiener-hopf") -> RenewalTable:
    """Exact ``V``/``W`` on ``0..y_max`` from the discrete renewal equation.

    ``W(0) = 1`` and ``W(x) = sum_j f(j) W(x - j)`` with ``f`` the ``H_1``
    pmf, so ``W(x) = P(some H_k = x)``; ``V`` is the running sum of ``W``.
    """
    if y_max < 0:
        raise ValueError("y_max must be nonnegative")
    f, tail = ladder_height_law(law, None, eps_tail, method=method)
    W = np.zeros(y_max + 1)
    W[0] = 1.0
    for x in range(1, y_max + 1):
        j = min(x, f.size)
        W[x] = float(np.dot(f[:j], W[x - 1 :: -1][:j]))
    V = np.cumsum(W)
    return RenewalTable(grid_max=y_max, V=V, W=W, h1_law=f, eps_tail=max(tail, 0.0),
                        method="exact-" + method, law_hash=law.law_hash)


def strict_renewal(law: StepLaw, table: RenewalTable) -> np.ndarray:
    """``V~`` on ``0..grid_max``: ``V(x - 1)`` for ``x >= 1`` and
    ``V~(0) = E[V~(S_1); S_1 > 0]``."""
    vt = np.empty(table.grid_max + 1)
    vt[1:] = table.V[:-1]
    pos = law.offsets[law.offsets > 0]
    if pos.size and pos.max() > table.grid_max:
        raise StateOverflow("table too short to evaluate V~(0)")
    vt[0] = math.fsum(law.p(pos) * vt[pos]) if pos.size else 0.0
    return vt


# -- Monte Carlo counterpart ---------------------------------------------------

def renewal_table_mc(law: StepLaw, y_max: int, n_paths: int, gen: np.random.Generator, *,
                     max_steps: int = 100_000, block: int = 512) -> dict:
    """Monte Carlo ``V`` on ``0..y_max`` by counting ladder points in sampled paths.

    Each path runs until it drops below ``-y_max`` (then every ladder
    height ``<= y_max`` has been seen) or ``max_steps`` elapse.  Paths that
    escape upward under a positive drift are stopped once their return
    probability ``exp(-g (x + y_max + 1))`` is below ``1e-13``.
    Incomplete paths are counted in ``"incomplete"``; their ladder counts
    are kept as-is, which biases ``V`` down.
    """
    g = _drift_exponent(law)
    escape = math.inf if g == 0 else 30.0 / g
    counts = np.zeros((n_paths, y_max + 1), dtype=np.int32)
    counts[:, 0] = 1  # the k = 0 ladder point
    pos = np.zeros(n_paths, dtype=np.int64)
    low = np.zeros(n_paths, dtype=np.int64)  # current ladder height
    alive = np.arange(n_paths)
    steps = 0
    while alive.size and steps < max_steps:
        m = min(block, max_steps - steps)
        incs = law.draw((alive.size, m), gen)
        traj = pos[alive, None] + np.cumsum(incs, axis=1)
        neg = -traj
        running = np.maximum(np.maximum.accumulate(neg, axis=1), low[alive, None])
        prev = np.concatenate([low[alive, None], running[:, :-1]], axis=1)
        new = neg > prev
        rows, cols = np.nonzero(new)
        h = neg[rows, cols]
        ok = h <= y_max
        np.add.at(counts, (alive[rows[ok]], h[ok]), 1)
        pos[alive] = traj[:, -1]
        low[alive] = running[:, -1]
        steps += m
        finished = (low[alive] > y_max) | (pos[alive] - y_max > escape)
        alive = alive[~finished]
    V_samples = np.cumsum(counts, axis=1, dtype=float)
    return {
        "V": V_samples.mean(axis=0),
        "se": V_samples.std(axis=0, ddof=1) / math.sqrt(n_paths),
        "incomplete": int(alive.size),
        "n_paths": n_paths,
    }


def ladder_height_mc(law: StepLaw, n_paths: int, gen: np.random.Generator, *, max_steps: int = 100_000,
                     block: int = 256) -> dict:
    """Empirical ``P(H_1 = j)``; walks escaping under positive drift count as ``T_1 = inf``."""
    g = _drift_exponent(law)
    escape = math.inf if g == 0 else 30.0 / g
    d = -law.min_step
    hits = np.zeros(d + 1, dtype=np.int64)
    pos = np.zeros(n_paths, dtype=np.int64)
    steps = 0
    while pos.size and steps < max_steps:
        m = min(block, max_steps - steps)
        traj = pos[:, None] + np.cumsum(law.draw((pos.size, m), gen), axis=1)
        below = traj < 0
        any_below = below.any(axis=1)
        first = np.argmax(below, axis=1)
        depth = -traj[np.flatnonzero(any_below), first[any_below]]
        hits += np.bincount(depth, minlength=d + 1)[: d + 1]
        pos = traj[~any_below, -1]
        pos = pos[pos <= escape]
        steps += m
    return {"pmf": hits[1:] / n_paths, "undecided": int(pos.size), "n_paths": n_paths}


# -- Alili-Doney identity ------------------------------------------------------

def alili_doney_check(law: StepLaw, n_max: int) -> dict:
    """Compare ``P(H_1 = 1, T_1 = n)`` with ``P(S_n = -1) / n`` for ``n <= n_max``.

    The left side comes from the walk kept ``>= 0`` for ``n - 1`` steps and
    then stepping to ``-1``; the right side from ``n``-fold convolution.
    """
    if n_max > 25:
        raise ValueError("n_max is limited to 25")
    dp = KilledDP(law, 0, 0)
    conv = np.ones(1)
    lo = 0
    rows = []
    for n in range(1, n_max + 1):
        # left: from state z >= 0 jump by -1 - z
        states = dp.states
        lhs = math.fsum(dp.mass * law.p(-1 - states))
        conv = np.convolve(conv, law.dense)
        lo += law.min_step
        idx = -1 - lo
        p_minus1 = float(conv[idx]) if 0 <= idx < conv.size else 0.0
        rhs = p_minus1 / n
        rows.append({"n": n, "lhs": lhs, "rhs": rhs, "abs_diff": abs(lhs - rhs)})
        dp.step()
    return {"rows": rows, "max_abs_diff": max(r["abs_diff"] for r in rows)}


# -- binary cache --------------------------------------------------------------

def cache_dir() -> Path:
    return Path(os.environ.get("CONDWALK_CACHE", Path.home() / ".cache" / "condwalk"))


def cached_renewal_table(law: StepLaw, y_max: int, eps_tail: float = EPS_TAIL, *, directory=None) -> RenewalTable:
    """:func:`renewal_table` memoised on disk under ``(law hash, y_max, eps_tail)``."""
    directory = Path(directory) if directory is not None else cache_dir()
    path = directory / f"renewal-{law.law_hash}-{y_max}-{eps_tail:.0e}.npz"
    if path.is_file():
        z = np.load(path)
        return RenewalTable(grid_max=y_max, V=z["V"], W=z["W"], h1_law=z["h1"], eps_tail=float(z["eps"]),
                            method=str(z["method"]), law_hash=law.law_hash)
    table = renewal_table(law, y_max, eps_tail)
    directory.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.stem + ".tmp.npz")
    np.savez(tmp, V=table.V, W=table.W, h1=table.h1_law, eps=table.eps_tail, method=table.method)
    os.replace(tmp, path)
    return table
