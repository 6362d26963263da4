"""Lattice step laws and unconditioned random-walk paths."""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DegenerateSupport, MonotoneDriftWarning, NonNormalized
from .rng import Stream, as_stream

PROB_TOL = 1e-12
MEAN_TOL = 1e-12
ZIPF_K = 10**6


@dataclass(frozen=True, eq=False)
class StepLaw:
    """Probability mass function of the increment ``S_1 - S_0`` on the integers.

    Build instances through :func:`make_step_law` (or :func:`named_law`),
    which validate the pmf and compute the aperiodicity flag.
    """

    offsets: np.ndarray
    probs: np.ndarray
    alpha: Optional[float] = None
    rho: Optional[float] = None
    aperiodic: bool = False
    name: str = "custom"
    truncated_mass: float = 0.0

    @property
    def min_step(self) -> int:
        return int(self.offsets[0])

    @property
    def max_step(self) -> int:
        return int(self.offsets[-1])

    @property
    def mean(self) -> float:
        return math.fsum(self.offsets * self.probs)

    @property
    def variance(self) -> float:
        m = self.mean
        return math.fsum((self.offsets - m) ** 2 * self.probs)

    @property
    def rho_bar(self) -> Optional[float]:
        return None if self.rho is None else 1.0 - self.rho

    @cached_property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.probs)
        c[-1] = 1.0
        return c

    @cached_property
    def dense(self) -> np.ndarray:
        """pmf on the contiguous range ``min_step..max_step``."""
        out = np.zeros(self.max_step - self.min_step + 1)
        out[self.offsets - self.min_step] = self.probs
        return out

    def p(self, k) -> np.ndarray:
        """pmf evaluated at integer offsets ``k`` (zero off the support)."""
        k = np.asarray(k)
        idx = k - self.min_step
        inside = (idx >= 0) & (idx < self.dense.size)
        out = np.zeros(k.shape)
        out[inside] = self.dense[idx[inside]]
        return out

    @cached_property
    def law_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.offsets, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.probs, dtype=np.float64).tobytes())
        return h.hexdigest()[:16]

    def to_json(self) -> dict:
        doc = {"offsets": self.offsets.tolist(), "probs": self.probs.tolist()}
        if self.alpha is not None:
            doc["alpha"] = self.alpha
        if self.rho is not None:
            doc["rho"] = self.rho
        return doc

    def draw(self, size, gen: np.random.Generator) -> np.ndarray:
        """Draw ``size`` i.i.d. increments by inverse-CDF lookup."""
        u = gen.random(size)
        idx = np.searchsorted(self.cdf, u, side="right")
        np.minimum(idx, self.offsets.size - 1, out=idx)
        return self.offsets[idx]

    def __repr__(self):
        if self.offsets.size <= 8:
            body = ", ".join(f"{o}: {p:.6g}" for o, p in zip(self.offsets, self.probs))
        else:
            body = f"{self.offsets.size} atoms in [{self.min_step}, {self.max_step}]"
        return f"StepLaw({self.name}; {{{body}}})"


def is_aperiodic(offsets) -> bool:
    """True iff the gcd of the pairwise differences of the support is 1."""
    offsets = np.asarray(offsets, dtype=np.int64)
    if offsets.size < 2:
        return False
    return int(np.gcd.reduce(offsets[1:] - offsets[0])) == 1


def make_step_law(offsets, probs, *, alpha=None, rho=None, name="custom", truncated_mass=0.0) -> StepLaw:
    """Validate a lattice pmf and return a :class:`StepLaw`.

    Zero-probability atoms are dropped and the support is sorted.  The
    walk must be able to move both up and down; a clearly nonzero mean
    without ``(alpha, rho)`` tags only triggers a
    :class:`~condwalk.errors.MonotoneDriftWarning`, since walks drifting to
    ``+inf`` still admit a harmonic renewal function.
    """
    offsets = np.asarray(offsets)
    probs = np.asarray(probs, dtype=float)
    if offsets.ndim != 1 or offsets.shape != probs.shape:
        raise ValueError("offsets and probs must be 1-d lists of equal length")
    if offsets.size and not np.all(np.asarray(offsets) == np.round(offsets)):
        raise ValueError("offsets must be integers")
    offsets = offsets.astype(np.int64)
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise ValueError("probabilities must be finite and nonnegative")
    total = math.fsum(probs)
    if abs(total - 1.0) > PROB_TOL:
        raise NonNormalized(f"probabilities sum to {total!r}, not 1")
    if np.unique(offsets).size != offsets.size:
        raise ValueError("offsets must be distinct")
    keep = probs > 0
    offsets, probs = offsets[keep], probs[keep]
    order = np.argsort(offsets)
    offsets, probs = offsets[order], probs[order]
    if offsets.size < 2:
        raise DegenerateSupport("step law is a point mass")
    if offsets[0] >= 0 or offsets[-1] <= 0:
        raise DegenerateSupport("step law must charge both negative and positive offsets")
    if alpha is not None and not 0 < alpha <= 2:
        raise ValueError("alpha must lie in (0, 2]")
    if rho is not None and not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    offsets.setflags(write=False)
    probs.setflags(write=False)
    law = StepLaw(
        offsets=offsets,
        probs=probs,
        alpha=None if alpha is None else float(alpha),
        rho=None if rho is None else float(rho),
        aperiodic=is_aperiodic(offsets),
        name=name,
        truncated_mass=float(truncated_mass),
    )
    if (alpha is None or rho is None) and abs(law.mean) > MEAN_TOL:
        warnings.warn(
            f"{name}: mean {law.mean:.3g} is nonzero and no (alpha, rho) tags were given; "
            "oscillation is assumed, not verified",
            MonotoneDriftWarning,
            stacklevel=2,
        )
    return law


def zipf2_law(K: int = ZIPF_K) -> StepLaw:
    """Symmetric law ``p(k) ∝ k^-2`` on ``1 <= |k| <= K`` (Cauchy domain)."""
    k = np.arange(1, K + 1, dtype=np.int64)
    w = 1.0 / k.astype(float) ** 2
    z = 2.0 * math.fsum(w)
    # mass beyond K, relative to the untruncated series 2 * pi^2 / 6
    lost = 1.0 - z / (np.pi**2 / 3.0)
    offsets = np.concatenate([-k[::-1], k])
    probs = np.concatenate([w[::-1], w]) / z
    probs = probs / math.fsum(probs)
    return make_step_law(offsets, probs, alpha=1.0, rho=0.5, name="zipf2", truncated_mass=lost)


def named_law(name: str, **kw) -> StepLaw:
    """Built-in laws: ``ssrw``, ``lazy``, ``zipf2``, ``ssrw-periodic``."""
    if name == "ssrw":
        return make_step_law([-1, 1], [0.5, 0.5], alpha=2.0, rho=0.5, name="ssrw")
    if name == "lazy":
        return make_step_law([-1, 0, 1], [0.25, 0.5, 0.25], alpha=2.0, rho=0.5, name="lazy")
    if name == "zipf2":
        return zipf2_law(**kw)
    if name == "ssrw-periodic":
        return make_step_law([-2, 2], [0.5, 0.5], alpha=2.0, rho=0.5, name="ssrw-periodic")
    raise KeyError(f"unknown law {name!r}; expected one of {sorted(NAMED_LAWS)}")


NAMED_LAWS = ("ssrw", "lazy", "zipf2", "ssrw-periodic")


def law_from_json(doc: dict, name: str = "custom") -> StepLaw:
    missing = {"offsets", "probs"} - set(doc)
    if missing:
        raise ValueError(f"law document lacks {sorted(missing)}")
    return make_step_law(
        doc["offsets"], doc["probs"], alpha=doc.get("alpha"), rho=doc.get("rho"), name=doc.get("name", name)
    )


def load_law(spec) -> StepLaw:
    """Resolve a law from a StepLaw, a built-in name, a JSON path or a dict."""
    if isinstance(spec, StepLaw):
        return spec
    if isinstance(spec, dict):
        return law_from_json(spec)
    spec = str(spec)
    if spec in NAMED_LAWS:
        return named_law(spec)
    path = Path(spec)
    if not path.is_file():
        raise FileNotFoundError(f"{spec!r} is neither a built-in law nor a readable JSON file")
    return law_from_json(json.loads(path.read_text()), name=path.stem)


@dataclass
class PathSample:
    """Finite integer trajectory ``S_0..S_n``."""

    start: int
    values: np.ndarray
    absorbed_at: Optional[int] = None
    stream_id: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int64)
        if self.values.size == 0 or self.values[0] != self.start:
            raise ValueError("path must start at its start point")

    def __len__(self):
        return self.values.size

    @property
    def n_steps(self) -> int:
        return self.values.size - 1

    @property
    def end(self) -> int:
        return int(self.values[-1])

    def increments(self) -> np.ndarray:
        return np.diff(self.values)


def sample_path(law: StepLaw, start: int, n_steps: int, stream) -> PathSample:
    """Sample ``n_steps`` of the unconditioned walk from ``start``."""
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    s = as_stream(stream)
    values = np.empty(n_steps + 1, dtype=np.int64)
    values[0] = start
    if n_steps:
        np.cumsum(law.draw(n_steps, s.gen), out=values[1:])
        values[1:] += start
    return PathSample(start=int(start), values=values, stream_id=s.stream_id)


def sample_paths(law: StepLaw, start, n_steps: int, size: int, gen: np.random.Generator) -> np.ndarray:
    """Array of shape ``(size, n_steps + 1)`` holding independent paths."""
    out = np.empty((size, n_steps + 1), dtype=np.int64)
    out[:, 0] = start
    if n_steps:
        np.cumsum(law.draw((size, n_steps), gen), axis=1, out=out[:, 1:])
        out[:, 1:] += np.asarray(start).reshape(-1, 1) if np.ndim(start) else start
    return out


def _killed(values: np.ndarray, kill_set: str) -> np.ndarray:
    if kill_set == "negative":
        return values < 0
    if kill_set == "nonpositive":
        return values <= 0
    raise ValueError("kill_set must be 'negative' or 'nonpositive'")


def sample_first_entrance(law: StepLaw, start: int, kill_set: str, max_steps: int, stream, *, block: int = 256) -> PathSample:
    """Run the walk until it first enters the kill set, or for ``max_steps`` steps.

    Non-absorption within the budget is a valid outcome, flagged by
    ``absorbed_at is None``.
    """
    s = as_stream(stream)
    _killed(np.zeros(0), kill_set)
    chunks = [np.array([start], dtype=np.int64)]
    pos, done = int(start), 0
    while done < max_steps:
        m = min(block, max_steps - done)
        seg = pos + np.cumsum(law.draw(m, s.gen))
        hit = np.flatnonzero(_killed(seg, kill_set))
        if hit.size:
            chunks.append(seg[: hit[0] + 1])
            return PathSample(start, np.concatenate(chunks), absorbed_at=done + hit[0] + 1, stream_id=s.stream_id)
        chunks.append(seg)
        pos, done = int(seg[-1]), done + m
        block = min(2 * block, 1 << 16)
    return PathSample(start, np.concatenate(chunks), absorbed_at=None, stream_id=s.stream_id)
