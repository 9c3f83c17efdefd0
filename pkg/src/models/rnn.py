from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from src.core.errors import ValidationError
from src.core.tensor import Activation, Mlp, as_tensor, build_mlp, mse_loss
from src.data.dataset import Trajectory
from src.data.sampling import Seed
from src.models.predictor import hold_last_sampled, observation_weights, stack_states


class RnnModel(nn.Module):
    """Elman cell ``h' = tanh(W [x, h] + b)`` with a linear readout of the next state.

    The cell is a single-layer network over the concatenated input and
    hidden state, so its weight holds both input-to-hidden and
    hidden-to-hidden blocks.
    """

    kind = "rnn"

    def __init__(self, dim: int, hidden: int = 64, seed: Optional[int] = None):
        super().__init__()
        self.dim = dim
        self.hidden = hidden
        self.cell = build_mlp([dim + hidden, hidden], Activation.IDENTITY, Activation.TANH, seed=seed)
        self.readout = build_mlp([hidden, dim], Activation.IDENTITY,
                                 seed=None if seed is None else seed + 1)

    @property
    def forecast_offset(self) -> int:
        return 0

    def networks(self) -> Dict[str, Mlp]:
        return {"cell": self.cell, "readout": self.readout}

    def hyperparameters(self) -> dict:
        return {"dim": self.dim, "hidden": self.hidden}

    def init_state(self, x: torch.Tensor) -> torch.Tensor:
        return x.new_zeros(*x.shape[:-1], self.hidden)

    def step(self, x: torch.Tensor, h: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        h = self.cell(torch.cat([x, h], dim=-1))
        return self.readout(h), h

    def forecast_trajectory(self, trajectory: Trajectory, horizon: int) -> np.ndarray:
        if horizon > len(trajectory):
            raise ValidationError(f"horizon {horizon} exceeds trajectory length {len(trajectory)}")
        return rnn_forecast(self, trajectory.states[0], horizon).detach().numpy()

    def training_loss(self, batch: Sequence[Trajectory], horizon: int, observed_fraction: float,
                      rng: Seed) -> Tuple[torch.Tensor, int]:
        """Teacher forcing: the state at step i predicts the state at i+1.

        Time points outside the sampled subset feed the last sampled state
        instead of the true one.
        """
        horizon = min(horizon, min(len(t) for t in batch))
        truth = stack_states(batch, 0, horizon)
        weights = observation_weights(batch, horizon, observed_fraction, rng)
        inputs = hold_last_sampled(truth, weights)
        predictions = teacher_forced(self, inputs[:, :-1, :])
        return mse_loss(predictions, truth[:, 1:, :], weights[:, 1:, :]), 0


def teacher_forced(model: RnnModel, inputs) -> torch.Tensor:
    inputs = as_tensor(inputs)
    h = model.init_state(inputs[..., 0, :])
    outputs = []
    for i in range(inputs.shape[-2]):
        y, h = model.step(inputs[..., i, :], h)
        outputs.append(y)
    return torch.stack(outputs, dim=-2)


def rnn_forecast(model: RnnModel, x0, steps: int) -> torch.Tensor:
    """Free-running rollout of ``steps`` points starting with ``x0`` itself"""
    if steps < 1:
        raise ValidationError(f"steps must be positive, got {steps}")
    x = as_tensor(x0)
    if x.shape[-1:] != (model.dim,):
        raise ValidationError(f"initial state dimension {tuple(x.shape)} does not match model dimension {model.dim}")
    h = model.init_state(x)
    outputs = [x]
    for _ in range(steps - 1):
        x, h = model.step(x, h)
        outputs.append(x)
    return torch.stack(outputs, dim=-2)
