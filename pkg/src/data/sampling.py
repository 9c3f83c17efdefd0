"""Simulated irregular sampling and partial observability."""

import math
from typing import Union

import numpy as np
import pandas as pd

from src.core.errors import ValidationError
from src.data.dataset import Trajectory

Seed = Union[int, np.random.Generator]


def as_rng(seed: Seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def subsample_indices(length: int, fraction: float, seed: Seed, minimum: int = 2) -> np.ndarray:
    """Sorted indices of ``max(ceil(fraction * length), minimum)`` points, always including 0"""
    if not 0 < fraction <= 1:
        raise ValidationError(f"fraction must lie in (0, 1], got {fraction}")
    n_keep = min(max(math.ceil(fraction * length - 1e-9), minimum), length)
    if n_keep < minimum:
        raise ValidationError(f"{length} points cannot keep the required {minimum}")
    if n_keep == length:
        return np.arange(length)
    rest = as_rng(seed).choice(np.arange(1, length), size=n_keep - 1, replace=False)
    return np.concatenate([[0], np.sort(rest)])


def subsample_irregular(trajectory: Trajectory, fraction: float, seed: Seed) -> Trajectory:
    if not 0 < fraction <= 1:
        raise ValidationError(f"fraction must lie in (0, 1], got {fraction}")
    if math.ceil(fraction * len(trajectory) - 1e-9) < 2:
        raise ValidationError(f"fraction {fraction} keeps fewer than 2 of {len(trajectory)} points")
    return trajectory.take(subsample_indices(len(trajectory), fraction, seed))


def forward_fill(states: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Replace unobserved entries with the most recent observed value of the same feature.

    Leading gaps take the first observed value; a feature never observed is
    filled with 0.
    """
    frame = pd.DataFrame(states).where(mask)
    return frame.ffill().bfill().fillna(0.0).to_numpy(dtype=np.float64)


def mask_features(trajectory: Trajectory, point_fraction: float, seed: Seed) -> Trajectory:
    """Hide half of the features at a random fraction of time points.

    Exactly ``D // 2`` features are hidden at each of ``floor(point_fraction * T)``
    points, point 0 included. Hidden entries are filled by :func:`forward_fill`
    in ``states`` and flagged False in ``mask``.
    """
    if not 0 <= point_fraction <= 1:
        raise ValidationError(f"point_fraction must lie in [0, 1], got {point_fraction}")
    T, D = trajectory.states.shape
    if D < 2:
        raise ValidationError(f"feature masking needs at least 2 features, got {D}")
    mask = trajectory.observed.copy()
    n_points = min(int(math.floor(point_fraction * T + 1e-9)), T)
    if n_points > 0:
        rng = as_rng(seed)
        points = rng.choice(T, size=n_points, replace=False)
        for p in np.sort(points):
            hidden = rng.choice(D, size=D // 2, replace=False)
            mask[p, hidden] = False
    return Trajectory(
        times=trajectory.times,
        states=forward_fill(trajectory.states, mask),
        mask=mask,
        index=trajectory.index,
    )
