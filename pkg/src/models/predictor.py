"""Interface shared by every learned forecaster."""

from typing import Dict, Protocol, Sequence, Tuple, runtime_checkable

import numpy as np
import torch

from src.core.errors import ValidationError
from src.core.tensor import Mlp, as_tensor
from src.data.dataset import Trajectory
from src.data.sampling import Seed, as_rng, subsample_indices


@runtime_checkable
class Predictor(Protocol):
    kind: str
    dim: int

    @property
    def forecast_offset(self) -> int:
        """Number of leading points consumed as context before the forecast starts"""
        ...

    def forecast_trajectory(self, trajectory: Trajectory, horizon: int) -> np.ndarray:
        """Forecast ``horizon`` points aligned with ``trajectory.times[offset:offset + horizon]``"""
        ...

    def training_loss(self, batch: Sequence[Trajectory], horizon: int, observed_fraction: float,
                      rng: Seed) -> Tuple[torch.Tensor, int]:
        """Scalar loss over a batch and the vector-field evaluations it took"""
        ...

    def networks(self) -> Dict[str, Mlp]:
        ...

    def hyperparameters(self) -> dict:
        ...


def shared_times(batch: Sequence[Trajectory], length: int) -> np.ndarray:
    if not batch:
        raise ValidationError("empty batch")
    if any(len(t) < length for t in batch):
        raise ValidationError(f"horizon {length} exceeds the shortest trajectory in the batch")
    times = batch[0].times[:length]
    for t in batch[1:]:
        if not np.array_equal(t.times[:length], times):
            raise ValidationError("batch trajectories do not share a time grid")
    return times


def observation_weights(batch: Sequence[Trajectory], length: int, observed_fraction: float,
                        rng: Seed) -> torch.Tensor:
    """``(B, length, D)`` weights: 1 on sampled time points and observed features.

    Each member draws its own subsample, resampled on every call.
    """
    rng = as_rng(rng)
    weights = np.zeros((len(batch), length, batch[0].dim))
    for b, trajectory in enumerate(batch):
        keep = subsample_indices(length, observed_fraction, rng)
        weights[b, keep] = trajectory.observed[:length][keep]
    return as_tensor(weights)


def stack_states(batch: Sequence[Trajectory], start: int, stop: int) -> torch.Tensor:
    return as_tensor(np.stack([t.states[start:stop] for t in batch]))




def hold_last_sampled(states: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
    """``(B, L, D)`` states where time points with zero weight repeat the last sampled point.

    Index 0 is always sampled, so every row has a point to hold.
    """
    sampled = (weights > 0).any(dim=-1).detach().numpy()
    positions = np.where(sampled, np.arange(sampled.shape[-1]), 0)
    last = torch.as_tensor(np.maximum.accumulate(positions, axis=-1))
    rows = torch.arange(states.shape[0]).unsqueeze(-1)
    return states[rows, last]
