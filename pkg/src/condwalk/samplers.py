"""Trajectory samplers for walks conditioned through Doob h-transforms."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (MaxStepsExceeded, RejectionBudgetExceeded, RowSumViolation, StateOverflow,
                     ZeroHarmonic)
from .laws import PathSample, StepLaw
from .renewal import RenewalTable, renewal_table
from .rng import as_stream

ROW_TOL = 1e-12


@dataclass(frozen=True)
class HKernel:
    """One-step Doob kernel ``p(z - x) h(z) / h(x)`` on states ``0..state_cap``.

    ``h = V`` for the chain kept nonnegative (``kind="plus"``) and ``h = W``
    for the chain that dies at zero (``kind="die-at-zero"``), where state 0
    is absorbing.  Row ``x`` lists transition probabilities to
    ``x + law.offsets``; rows with ``h(x) = 0`` are unrealizable and hold NaN.
    """

    law: StepLaw
    kind: str
    state_cap: int
    h: np.ndarray
    probs: np.ndarray
    cdf: np.ndarray

    def row(self, x: int) -> dict:
        return {int(x + o): float(p) for o, p in zip(self.law.offsets, self.probs[x]) if p > 0}

    def realizable(self, x: int) -> bool:
        return bool(self.h[x] > 0)

    def step(self, states: np.ndarray, gen: np.random.Generator, check: bool = True) -> np.ndarray:
        """Advance every entry of ``states`` by one kernel step."""
        u = gen.random(states.size)
        j = (self.cdf[states] <= u[:, None]).sum(axis=1)
        new = states + self.law.offsets[j]
        if check and new.size and new.max() > self.state_cap:
            raise StateOverflow(f"chain left 0..{self.state_cap}")
        return new


def build_h_kernel(law: StepLaw, table: Optional[RenewalTable], kind: str = "plus",
                   state_cap: int = 64) -> HKernel:
    """Tabulate the Doob kernel and verify every realizable row sums to one.

    Raises :class:`RowSumViolation` instead of renormalising.
    """
    if kind not in ("plus", "die-at-zero"):
        raise ValueError(f"unknown kernel kind {kind!r}")
    need = state_cap + max(law.max_step, 0)
    if table is None or table.grid_max < need:
        table = renewal_table(law, need)
    h = table.V if kind == "plus" else table.W
    h = np.asarray(h[: need + 1], dtype=float)
    x = np.arange(state_cap + 1)
    z = x[:, None] + law.offsets[None, :]
    # W(0) = 1 turns the exact-zero entry into the absorption probability
    hz = np.where(z >= 0, h[np.clip(z, 0, need)], 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        probs = law.probs[None, :] * hz / h[x][:, None]
    dead = ~(h[x] > 0)
    probs[dead] = np.nan
    if kind == "die-at-zero":
        probs[0] = np.where(law.offsets == 0, 1.0, 0.0) if 0 in law.offsets else np.nan
    sums = probs.sum(axis=1)
    live = ~dead
    if kind == "die-at-zero":
        live[0] = False
    bad = live & ~(np.abs(sums - 1.0) <= ROW_TOL)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise RowSumViolation(f"row {i} of the {kind} kernel sums to {sums[i]!r}")
    cdf = np.cumsum(np.nan_to_num(probs), axis=1)
    # pin each row's cdf to 1 from its last positive entry on
    pos = np.nan_to_num(probs) > 0
    last = np.where(pos.any(axis=1), pos.shape[1] - 1 - np.argmax(pos[:, ::-1], axis=1), pos.shape[1] - 1)
    cdf[np.arange(cdf.shape[1])[None, :] >= last[:, None]] = 1.0
    return HKernel(law, kind, int(state_cap), h, probs, cdf)


def grow_kernel(kernel: HKernel, top: int) -> HKernel:
    """Rebuild ``kernel`` with a cap of at least twice the old one and above ``top``."""
    return build_h_kernel(kernel.law, None, kernel.kind, max(2 * kernel.state_cap, top + 1))


def plus_kernel_for(law: StepLaw, start: int, n: int, table: Optional[RenewalTable] = None) -> HKernel:
    """Kernel whose cap can never be exceeded within ``n`` steps from ``start``."""
    return build_h_kernel(law, table, "plus", start + n * max(law.max_step, 1))


def plus_paths(kernel: HKernel, y: int, n: int, size: int, gen: np.random.Generator,
               record: bool = False) -> np.ndarray:
    """``size`` independent plus-chain runs of ``n`` steps from ``y``.

    Returns the endpoints, or the full ``(size, n + 1)`` array if ``record``.
    """
    if kernel.kind != "plus":
        raise ValueError("expected a plus kernel")
    if not 0 <= y <= kernel.state_cap:
        raise StateOverflow(f"start {y} outside 0..{kernel.state_cap}")
    s = np.full(size, y, dtype=np.int64)
    out = None
    if record:
        out = np.empty((size, n + 1), dtype=np.int64)
        out[:, 0] = y
    for k in range(n):
        s = kernel.step(s, gen)
        if record:
            out[:, k + 1] = s
    return out if record else s


def sample_plus(kernel: HKernel, y: int, n: int, stream) -> PathSample:
    """One trajectory of ``n`` steps under the plus kernel from ``y``."""
    s = as_stream(stream)
    vals = plus_paths(kernel, y, n, 1, s.gen, record=True)[0]
    return PathSample(int(y), vals, stream_id=s.stream_id, meta={"kind": "plus"})


def rejection_paths(law: StepLaw, y: int, n: int, N: int, count: int, gen: np.random.Generator, *,
                    max_attempts: Optional[int] = None, batch: int = 1 << 14, record: bool = False) -> dict:
    """Draw unconditioned ``N``-step paths until ``count`` stay ``>= 0``.

    Returns the first ``n + 1`` states of each accepted path (or just
    ``S_n``), together with the number of attempts.
    """
    if N < n:
        raise ValueError("horizon N must be at least n")
    max_attempts = max_attempts if max_attempts is not None else 10_000 * count
    kept, attempts, got = [], 0, 0
    while got < count:
        if attempts >= max_attempts:
            raise RejectionBudgetExceeded(f"{got} of {count} accepted after {attempts} attempts")
        b = min(batch, max_attempts - attempts)
        s = np.full(b, y, dtype=np.int64)
        idx = np.arange(b)
        head = np.empty((b, n + 1), dtype=np.int64)
        head[:, 0] = y
        for k in range(1, N + 1):
            # only walkers still alive are advanced
            s = s + law.draw(s.size, gen)
            ok = s >= 0
            s, idx = s[ok], idx[ok]
            if k <= n:
                head[idx, k] = s
            if s.size == 0:
                break
        attempts += b
        acc = head[idx]
        kept.append(acc if record else acc[:, -1])
        got += acc.shape[0]
    res = np.concatenate(kept)[:count]
    return {"paths" if record else "endpoints": res, "attempts": attempts, "accepted": got}


def sample_plus_by_rejection(law: StepLaw, y: int, n: int, N: int, stream, *,
                             max_attempts: int = 1_000_000) -> PathSample:
    """First ``n`` steps of an ``N``-step path accepted on staying ``>= 0``."""
    s = as_stream(stream)
    res = rejection_paths(law, y, n, N, 1, s.gen, max_attempts=max_attempts, batch=256, record=True)
    return PathSample(int(y), res["paths"][0], stream_id=s.stream_id,
                      meta={"kind": "rejection", "horizon": N, "attempts": res["attempts"]})


def die_at_zero_kernel_for(law: StepLaw, start: int, n: int, table: Optional[RenewalTable] = None) -> HKernel:
    return build_h_kernel(law, table, "die-at-zero", max(start, 1) + n * max(law.max_step, 1))


def die_at_zero_paths(kernel: HKernel, y: int, n: int, size: int, gen: np.random.Generator,
                      record: bool = False) -> dict:
    """Run ``size`` die-at-zero chains for at most ``n`` steps.

    Returns ``{"state": S_n (0 once absorbed), "zeta": lifetime or -1 if
    still alive at n}`` and, if ``record``, the ``(size, n + 1)`` paths with
    absorbed entries held at 0.
    """
    if kernel.kind != "die-at-zero":
        raise ValueError("expected a die-at-zero kernel")
    if y > 0 and not kernel.realizable(y):
        raise ZeroHarmonic(f"W({y}) = 0")
    s = np.full(size, y, dtype=np.int64)
    zeta = np.where(s == 0, 0, -1).astype(np.int64)
    paths = None
    if record:
        paths = np.zeros((size, n + 1), dtype=np.int64)
        paths[:, 0] = y
    for k in range(1, n + 1):
        live = np.flatnonzero(zeta < 0)
        if live.size == 0:
            break
        s[live] = kernel.step(s[live], gen)
        zeta[live[s[live] == 0]] = k
        if record:
            paths[:, k] = s
    out = {"state": s, "zeta": zeta}
    if record:
        out["paths"] = paths
    return out


def sample_die_at_zero(kernel: HKernel, y: int, stream, max_steps: int = 1_000_000) -> PathSample:
    """A complete trajectory from ``y`` that stays positive and ends at 0.

    The kernel is rebuilt with a doubled cap whenever the path reaches it.
    Lifetimes beyond ``max_steps`` raise :class:`MaxStepsExceeded`.
    """
    s = as_stream(stream)
    if y == 0:
        return PathSample(0, [0], absorbed_at=0, stream_id=s.stream_id, meta={"kind": "die-at-zero"})
    if not kernel.realizable(y):
        raise ZeroHarmonic(f"W({y}) = 0")
    # scalar loop over plain lists: per-step numpy calls dominate otherwise
    offsets = kernel.law.offsets.tolist()
    rows = kernel.cdf.tolist()
    vals = [int(y)]
    x = int(y)
    while True:
        for u in s.gen.random(4096).tolist():
            row = rows[x]
            j = 0
            while row[j] <= u:
                j += 1
            x += offsets[j]
            vals.append(x)
            if x == 0:
                return PathSample(int(y), vals, absorbed_at=len(vals) - 1, stream_id=s.stream_id,
                                  meta={"kind": "die-at-zero"})
            if len(vals) > max_steps:
                raise MaxStepsExceeded(f"no absorption within {max_steps} steps")
            if x >= kernel.state_cap:
                kernel = grow_kernel(kernel, x)
                rows = kernel.cdf.tolist()
