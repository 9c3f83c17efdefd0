from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from src.core.errors import ValidationError
from src.core.tensor import Activation, Mlp, as_tensor, build_mlp, mse_loss
from src.data.dataset import Trajectory
from src.data.sampling import Seed
from src.models.predictor import stack_states


def moving_average(x: torch.Tensor, kernel_size: int) -> torch.Tensor:
    """Trend of ``(..., L, D)`` windows; ends padded by repeating the edge values"""
    if kernel_size % 2 == 0:
        raise ValidationError(f"kernel_size must be odd, got {kernel_size}")
    if kernel_size == 1:
        return x
    pad = (kernel_size - 1) // 2
    lead = x.shape[:-2]
    flat = x.reshape(-1, *x.shape[-2:]).transpose(1, 2)  # (N, D, L)
    padded = F.pad(flat, (pad, pad), mode="replicate")
    trend = F.avg_pool1d(padded, kernel_size=kernel_size, stride=1)
    return trend.transpose(1, 2).reshape(*lead, *x.shape[-2:])


def decompose(x: torch.Tensor, kernel_size: int) -> Tuple[torch.Tensor, torch.Tensor]:
    trend = moving_average(x, kernel_size)
    return trend, x - trend


class DLinearModel(nn.Module):
    """Trend/seasonal decomposition with one linear map per branch, shared across channels"""

    kind = "dlinear"

    def __init__(self, dim: int, lookback: int, horizon: int, kernel_size: int = 25, seed: Optional[int] = None):
        super().__init__()
        if kernel_size % 2 == 0:
            raise ValidationError(f"kernel_size must be odd, got {kernel_size}")
        self.dim = dim
        self.lookback = lookback
        self.horizon = horizon
        self.kernel_size = kernel_size
        self.trend_map = build_mlp([lookback, horizon], Activation.IDENTITY, seed=seed)
        self.seasonal_map = build_mlp([lookback, horizon], Activation.IDENTITY, seed=seed)
        with torch.no_grad():
            for net in (self.trend_map, self.seasonal_map):
                net.layers[0].weight.fill_(1.0 / lookback)
                net.layers[0].bias.zero_()

    @property
    def forecast_offset(self) -> int:
        return self.lookback

    def networks(self) -> Dict[str, Mlp]:
        return {"trend": self.trend_map, "seasonal": self.seasonal_map}

    def hyperparameters(self) -> dict:
        return {"dim": self.dim, "lookback": self.lookback, "horizon": self.horizon, "kernel_size": self.kernel_size}

    def forecast_trajectory(self, trajectory: Trajectory, horizon: int) -> np.ndarray:
        if horizon > self.horizon:
            raise ValidationError(f"horizon {horizon} exceeds the model horizon {self.horizon}")
        if len(trajectory) < self.lookback:
            raise ValidationError(f"trajectory of length {len(trajectory)} is shorter than lookback {self.lookback}")
        forecast = dlinear_forecast(self, trajectory.states[:self.lookback])
        return forecast[:horizon].detach().numpy()

    def training_loss(self, batch: Sequence[Trajectory], horizon: int, observed_fraction: float,
                      rng: Seed) -> Tuple[torch.Tensor, int]:
        horizon = min(horizon, self.horizon)
        inputs = stack_states(batch, 0, self.lookback)
        targets = stack_states(batch, self.lookback, self.lookback + horizon)
        forecast = dlinear_forecast(self, inputs)[..., :horizon, :]
        return mse_loss(forecast, targets), 0


def dlinear_forecast(model: DLinearModel, lookback_window) -> torch.Tensor:
    x = as_tensor(lookback_window)
    if x.shape[-2:] != (model.lookback, model.dim):
        raise ValidationError(f"window shape {tuple(x.shape)} does not match ({model.lookback}, {model.dim})")
    trend, seasonal = decompose(x, model.kernel_size)
    out = model.trend_map(trend.transpose(-1, -2)) + model.seasonal_map(seasonal.transpose(-1, -2))
    return out.transpose(-1, -2)
