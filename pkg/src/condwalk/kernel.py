"""Exact finite-horizon laws of killed and conditioned lattice walks."""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ._dp import KilledDP
from .errors import DegenerateConditioning, ZeroHarmonic
from .laws import StepLaw
from ._io import atomic_write as _atomic_write
from .renewal import RenewalTable, renewal_table, strict_renewal

KINDS = ("killed", "meander", "plus", "die-at-zero")


@dataclass(frozen=True)
class FiniteLaw:
    """Probability vector over the integer states ``offset..offset+len(mass)-1``.

    ``mass`` need not sum to one: for killed kinds the deficit is recorded in
    ``absorbed_mass`` and any truncation leak in ``lost_mass``.
    """

    offset: int
    mass: np.ndarray
    horizon: int
    kind: str
    lost_mass: float = 0.0
    absorbed_mass: float = 0.0
    survival: Optional[float] = None
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def states(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.mass.size)

    @property
    def total(self) -> float:
        return math.fsum(self.mass)

    def __getitem__(self, z: int) -> float:
        i = int(z) - self.offset
        return float(self.mass[i]) if 0 <= i < self.mass.size else 0.0

    def as_dict(self, tol: float = 0.0) -> dict:
        return {int(z): float(m) for z, m in zip(self.states, self.mass) if m > tol}

    def trimmed(self, tol: float = 0.0) -> "FiniteLaw":
        nz = np.flatnonzero(self.mass > tol)
        if nz.size == 0:
            return self
        lo, hi = nz[0], nz[-1] + 1
        return FiniteLaw(self.offset + int(lo), self.mass[lo:hi].copy(), self.horizon, self.kind,
                         self.lost_mass, self.absorbed_mass, self.survival, dict(self.extras))

    def normalized(self) -> np.ndarray:
        return self.mass / self.total

    def mean(self) -> float:
        return math.fsum(self.states * self.mass) / self.total

    def cdf(self, x) -> np.ndarray:
        """Right-continuous CDF of the normalised law at real ``x``."""
        c = np.cumsum(self.normalized())
        idx = np.floor(np.asarray(x, dtype=float)).astype(np.int64) - self.offset
        out = np.where(idx >= 0, c[np.clip(idx, 0, c.size - 1)], 0.0)
        return np.where(idx >= c.size, 1.0, out)

    def cdf_left(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.cdf(np.ceil(x) - 1.0)

    def sample(self, size, gen: np.random.Generator) -> np.ndarray:
        c = np.cumsum(self.normalized())
        c[-1] = 1.0
        idx = np.searchsorted(c, gen.random(size), side="right")
        return self.offset + np.minimum(idx, c.size - 1)

    def header(self) -> dict:
        return {"kind": self.kind, "horizon": self.horizon, "offset": self.offset,
                "survival": self.survival, "lost_mass": self.lost_mass, "absorbed_mass": self.absorbed_mass}

    def to_csv(self, path=None, extra_header: Optional[dict] = None) -> str:
        head = dict(self.header(), **(extra_header or {}))
        buf = io.StringIO()
        buf.write("# " + json.dumps(head, sort_keys=True) + "\n")
        buf.write("state,mass\n")
        for z, m in zip(self.states, self.mass):
            buf.write(f"{int(z)},{float(m)!r}\n")
        text = buf.getvalue()
        if path is not None:
            _atomic_write(Path(path), text)
        return text

    @classmethod
    def from_csv(cls, path) -> "FiniteLaw":
        lines = Path(path).read_text().splitlines()
        head = json.loads(lines[0][2:])
        rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:] if ln])
        states = rows[:, 0].astype(np.int64)
        return cls(int(states[0]), rows[:, 1], int(head["horizon"]), head["kind"],
                   float(head["lost_mass"]), float(head["absorbed_mass"]), head["survival"])


def _ensure_table(law: StepLaw, table: Optional[RenewalTable], top: int) -> RenewalTable:
    if table is not None and table.grid_max >= top:
        return table
    return renewal_table(law, max(top, 1))


def _killed_dp(law: StepLaw, start: int, N: int, floor: int, cap=None, edge_hits=None) -> KilledDP:
    if start >= floor:
        dp = KilledDP(law, start, floor, cap=cap)
        steps = N
    else:
        # start below the floor (strict conditioning from 0): take the first step by hand
        dp = KilledDP(law, floor, floor, cap=cap)
        if N == 0:
            dp.mass = np.zeros(0)
            return dp
        top = start + law.max_step
        states = np.arange(floor, max(top, floor) + 1)
        dp.mass = law.p(states - start) if top >= floor else np.zeros(1)
        dp.killed = 1.0 - float(dp.mass.sum())
        if edge_hits is not None:
            edge_hits.append(float(law.p(np.array([floor - 1 - start]))[0]))
        dp.n = 1
        steps = N - 1
    for _ in range(steps):
        edge, _k = dp.step()
        if edge_hits is not None:
            edge_hits.append(edge)
    return dp


def killed_law(law: StepLaw, start: int, N: int, boundary: str = "weak", *, cap: Optional[int] = None) -> FiniteLaw:
    """Sub-probability ``q_N(z) = P_start(S_N = z, S_1..S_N stay in the half-line)``.

    ``boundary="weak"`` keeps ``S_k >= 0`` (event ``C_N``); ``"strict"``
    keeps ``S_k > 0``.  ``survival`` is the total mass.
    """
    if N < 0 or start < 0:
        raise ValueError("need N >= 0 and start >= 0")
    floor = {"weak": 0, "strict": 1}[boundary]
    if N == 0:
        return FiniteLaw(start, np.ones(1), 0, "killed", survival=1.0)
    dp = _killed_dp(law, start, N, floor, cap=cap)
    surv = dp.survival
    return FiniteLaw(floor, dp.mass, N, "killed", lost_mass=dp.lost, absorbed_mass=dp.killed,
                     survival=surv, extras={"boundary": boundary})


def survival_curve(law: StepLaw, N: int, start: int = 0) -> np.ndarray:
    """``P_start(C_n)`` for ``n = 0..N`` from a single forward pass."""
    dp = KilledDP(law, start, 0)
    out = np.empty(N + 1)
    out[0] = 1.0
    for n in range(1, N + 1):
        dp.step()
        out[n] = dp.mass.sum()
    return out


def plus_law(law: StepLaw, table: Optional[RenewalTable], start: int, N: int) -> FiniteLaw:
    """Exact law of ``S_N`` under ``P_start^+``: ``V(z) q_N(z) / V(start)``.

    No renormalisation is applied: the total mass equals one exactly when
    ``V`` is harmonic for the walk killed below 0.
    """
    if N == 0:
        return FiniteLaw(start, np.ones(1), 0, "plus", survival=1.0)
    q = killed_law(law, start, N, "weak")
    table = _ensure_table(law, table, int(q.states[-1]))
    mass = table.v(q.states) * q.mass / table.V[start]
    return FiniteLaw(q.offset, mass, N, "plus", lost_mass=q.lost_mass, survival=q.survival)


def meander_law(law: StepLaw, N: int, start: int = 0) -> FiniteLaw:
    """``P(S_N = z | C_N)``, the killed law divided by its survival."""
    q = killed_law(law, start, N, "weak")
    if not q.survival > 0:
        raise DegenerateConditioning(f"P(C_{N}) = 0")
    return FiniteLaw(q.offset, q.mass / q.survival, N, "meander", lost_mass=q.lost_mass, survival=q.survival)


def die_at_zero_law(law: StepLaw, table: Optional[RenewalTable], start: int, N: int) -> FiniteLaw:
    """Law of ``(S_N, zeta > N)`` for the walk conditioned to die at zero.

    ``mass[z]`` is ``W(z) r_N(z) / W(start)`` over ``z >= 1`` with ``r_N`` the
    walk kept strictly positive; ``absorbed_mass`` is ``P(zeta <= N)`` and
    ``extras["lifetime_cdf"][n] = P(zeta <= n)``.
    """
    if start < 0:
        raise ValueError("start must be nonnegative")
    if start == 0:
        # the process is identically zero, zeta = 0
        return FiniteLaw(1, np.zeros(0), N, "die-at-zero", absorbed_mass=1.0, survival=0.0,
                         extras={"lifetime_cdf": np.ones(N + 1)})
    table = _ensure_table(law, table, start + N * max(law.max_step, 0))
    w0 = float(table.W[start])
    if not w0 > 0:
        raise ZeroHarmonic(f"W({start}) = 0: the walk cannot enter (-inf, 0] exactly at 0 from {start}")
    hits: list[float] = []
    dp = _killed_dp(law, start, N, 1, edge_hits=hits)
    mass = table.w(dp.states) * dp.mass / w0 if dp.mass.size else dp.mass
    # W(0) = 1 weights the exact-zero hits
    lifetime = np.concatenate([[0.0], np.cumsum(hits) / w0])
    return FiniteLaw(1, mass, N, "die-at-zero", lost_mass=dp.lost, absorbed_mass=float(lifetime[-1]),
                     survival=float(mass.sum()) if mass.size else 0.0, extras={"lifetime_cdf": lifetime})


# -- exact identity checks -----------------------------------------------------

def harmonicity_check(law: StepLaw, table: Optional[RenewalTable], x_max: int, N_max: int,
                      boundary: str = "both") -> dict:
    """Largest ``|h(x) - E_x[h(S_N); survive N steps]|`` over the ``(x, N)`` grid.

    ``h = V`` with the walk kept ``>= 0`` (weak) and ``h = V~`` with the walk
    kept ``> 0`` (strict).
    """
    table = _ensure_table(law, table, x_max + N_max * law.max_step + 1)
    out = {"x_max": x_max, "N_max": N_max}
    cases = ("weak", "strict") if boundary == "both" else (boundary,)
    for case in cases:
        if case == "weak":
            h, floor = table.V, 0
        else:
            h, floor = strict_renewal(law, table), 1
        worst = 0.0
        grid = np.zeros((x_max + 1, N_max))
        for x in range(x_max + 1):
            dp = _killed_dp(law, x, 1, floor)
            for N in range(1, N_max + 1):
                if N > 1:
                    dp.step()
                val = math.fsum(dp.mass * h[dp.states]) if dp.mass.size else 0.0
                grid[x, N - 1] = abs(val - h[x])
            worst = max(worst, float(grid[x].max()))
        out[case] = worst
        out[case + "_grid"] = grid
    out["max_residual"] = max(out[c] for c in cases)
    return out


def plus_chain_law(law: StepLaw, table: RenewalTable, start: int, N: int) -> FiniteLaw:
    """Endpoint law under ``P_start^+`` by iterating the one-step Doob kernel.

    Independent of :func:`plus_law`: each step moves mass ``m(x)`` to
    ``m(x) p(z - x) V(z) / V(x)`` and never touches the killed kernel.
    """
    mass = np.zeros(1)
    mass[0] = 1.0
    lo = start
    for _ in range(N):
        states = np.arange(lo, lo + mass.size)
        weight = mass / table.V[states]
        full = np.convolve(weight, law.dense)
        new_lo = lo + law.min_step
        z = np.arange(new_lo, new_lo + full.size)
        keep = z >= 0
        full, z = full[keep], z[keep]
        mass = full * table.v(z)
        lo = int(z[0])
    return FiniteLaw(lo, mass, N, "plus")


def meander_plus_duality_check(law: StepLaw, table: Optional[RenewalTable], N: int, events: str = "endpoint") -> dict:
    """Residuals of ``P^+(B) = P(C_N) E^{(m),N}[V(S_N) 1_B]`` over an event family.

    ``events="endpoint"`` uses ``B = {S_N = z}`` for every reachable ``z``
    plus ``B`` = whole space; ``"cylinder"`` (``N <= 12``) uses every
    cylinder ``{S_1 = s_1, ..., S_k = s_k}``, ``k <= N``, of a nonnegative path.
    """
    table = _ensure_table(law, table, N * law.max_step + 1)
    mean = meander_law(law, N)
    pc = mean.survival
    if events == "endpoint":
        lhs = plus_chain_law(law, table, 0, N)
        rhs_mass = pc * mean.mass * table.v(mean.states)
        states = np.union1d(lhs.states, mean.states)
        a = np.array([lhs[z] for z in states])
        b = np.array([rhs_mass[z - mean.offset] if 0 <= z - mean.offset < rhs_mass.size else 0.0 for z in states])
        res = np.abs(a - b)
        full = abs(lhs.total - pc * math.fsum(mean.mass * table.v(mean.states)))
        return {"N": N, "events": int(states.size) + 1, "max_residual": float(max(res.max(), full)),
                "full_space": full}
    if events != "cylinder":
        raise ValueError("events must be 'endpoint' or 'cylinder'")
    if N > 12:
        raise ValueError("cylinder enumeration is limited to N <= 12")
    offsets, probs, V = law.offsets, law.probs, table.V
    worst = 0.0
    count = 0

    def visit(x, depth, p_free, p_plus):
        # returns sum over extensions of p_free(path) * V(S_N)
        nonlocal worst, count
        if depth == N:
            rhs_leaf = p_free * V[x]
            return rhs_leaf
        acc = 0.0
        for o, p in zip(offsets, probs):
            z = x + o
            if z < 0:
                continue
            q_plus = p_plus * p * V[z] / V[x]
            sub = visit(z, depth + 1, p_free * p, q_plus)
            # P(C_N) E^{(m),N}[V(S_N) 1_B] = E[V(S_N); C_N, B]
            worst = max(worst, abs(q_plus - sub))
            count += 1
            acc += sub
        return acc

    total = visit(0, 0, 1.0, 1.0)
    worst = max(worst, abs(1.0 - total))
    return {"N": N, "events": count + 1, "max_residual": worst, "full_space": abs(1.0 - total)}
