"""Forward dynamic programming for the walk killed below a floor."""
from __future__ import annotations

import numpy as np

from .errors import StateOverflow


class KilledDP:
    """Sub-probability vector of the walk restricted to states ``>= floor``.

    ``mass[i]`` is the probability of being at state ``floor + i`` having
    stayed ``>= floor`` at every step so far.  Each :meth:`step` returns the
    mass killed in that step, split into the part landing exactly on
    ``floor - 1`` and the rest.
    """

    def __init__(self, law, start: int, floor: int, cap: int | None = None, on_overflow: str = "leak"):
        if start < floor:
            raise ValueError(f"start {start} lies below the floor {floor}")
        self.law = law
        self.floor = int(floor)
        self.cap = cap
        self.on_overflow = on_overflow
        self.mass = np.zeros(start - floor + 1)
        self.mass[-1] = 1.0
        self.n = 0
        self.killed = 0.0
        self.lost = 0.0

    @property
    def states(self) -> np.ndarray:
        return np.arange(self.floor, self.floor + self.mass.size)

    @property
    def survival(self) -> float:
        return float(self.mass.sum())

    def step(self) -> tuple[float, float]:
        law = self.law
        full = np.convolve(self.mass, law.dense)
        # full[j] sits at state floor + min_step + j
        cut = -law.min_step
        below = full[:cut]
        at_edge = float(below[-1]) if below.size else 0.0
        killed = float(below.sum())
        mass = full[cut:]
        if self.cap is not None:
            top = self.cap - self.floor + 1
            if mass.size > top:
                spill = float(mass[top:].sum())
                if spill > 0 and self.on_overflow == "raise":
                    raise StateOverflow(f"state cap {self.cap} exceeded at step {self.n + 1}")
                self.lost += spill
                mass = mass[:top]
        self.mass = mass
        self.killed += killed
        self.n += 1
        return at_edge, killed

    def run(self, n_steps: int) -> "KilledDP":
        for _ in range(n_steps):
            self.step()
        return self
