from typing import Dict, Optional

import torch
from torch import nn

from src.core.errors import ValidationError
from src.core.tensor import Activation, Mlp, as_tensor, build_mlp
from src.paths.control_path import with_time_channel


class MlpCorrectorModel(nn.Module):
    """Pointwise baseline: ``(x_hat_i, t_i) -> e_i`` with no coupling across time"""

    kind = "mlp"

    def __init__(self, dim: int, width: int = 100, depth: int = 2, seed: Optional[int] = None):
        super().__init__()
        self.dim = dim
        self.width = width
        self.depth = depth
        self.net = build_mlp([dim + 1] + [width] * depth + [dim], Activation.RELU, seed=seed)

    def networks(self) -> Dict[str, Mlp]:
        return {"net": self.net}

    def hyperparameters(self) -> dict:
        return {"dim": self.dim, "width": self.width, "depth": self.depth}


def mlp_correct(model: MlpCorrectorModel, times, forecast) -> torch.Tensor:
    forecast = as_tensor(forecast)
    if forecast.shape[-1:] != (model.dim,):
        raise ValidationError(f"forecast dimension {tuple(forecast.shape)} does not match corrector dimension {model.dim}")
    return model.net(with_time_channel(times, forecast))
