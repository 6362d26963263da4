"""Argument checks shared by the estimators and the command line."""
from __future__ import annotations

import numbers

import numpy as np

from .laws import StepLaw, load_law


def check_step_law(law) -> StepLaw:
    """Accept a StepLaw, a built-in name, a JSON path or a law dictionary."""
    return load_law(law)


def check_count(value, name: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise TypeError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_grid(values, name: str = "Ngrid") -> list:
    """Strictly increasing list of positive integers."""
    arr = [check_count(v, name, 1) for v in np.atleast_1d(values).tolist()]
    if not arr or any(b <= a for a, b in zip(arr, arr[1:])):
        raise ValueError(f"{name} must be a nonempty strictly increasing list")
    return arr


def check_probability(value, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1]")
    return value


def check_states(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.dtype.kind not in "iu":
        if arr.dtype.kind == "f" and np.all(np.floor(arr) == arr):
            arr = arr.astype(np.int64)
        else:
            raise TypeError("states must be integers")
    if arr.size and arr.min() < 0:
        raise ValueError("states must be nonnegative")
    return arr.astype(np.int64)
