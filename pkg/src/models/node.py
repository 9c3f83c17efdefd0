import logging
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from src.core.errors import ValidationError
from src.core.tensor import Activation, Mlp, as_tensor, build_mlp, mse_loss
from src.data.dataset import Trajectory
from src.data.sampling import Seed
from src.models.predictor import observation_weights, shared_times, stack_states
from src.solvers.controller import StepController
from src.solvers.integrate import SolveResult, integrate_adaptive
from src.solvers.tableaus import get_tableau

logger = logging.getLogger(__name__)


class NodeModel(nn.Module):
    """Neural ODE forecaster: ``dx/dt = f(x)`` with ``f`` an ``FC(width)_depth`` tanh network"""

    kind = "node"

    def __init__(self, dim: int, width: int = 100, depth: int = 2, solver: str = "tsit5",
                 controller: Optional[StepController] = None, seed: Optional[int] = None):
        super().__init__()
        self.dim = dim
        self.width = width
        self.depth = depth
        self.solver = solver
        self.tableau = get_tableau(solver)
        self.controller = controller or StepController()
        self.field = build_mlp([dim] + [width] * depth + [dim], Activation.TANH, seed=seed)

    @property
    def forecast_offset(self) -> int:
        return 0

    def vector_field(self, t: float, x: torch.Tensor) -> torch.Tensor:
        return self.field(x)

    def networks(self) -> Dict[str, Mlp]:
        return {"field": self.field}

    def hyperparameters(self) -> dict:
        return {"dim": self.dim, "width": self.width, "depth": self.depth, "solver": self.solver,
                "controller": self.controller.to_dict()}

    def forecast_trajectory(self, trajectory: Trajectory, horizon: int) -> np.ndarray:
        if horizon > len(trajectory):
            raise ValidationError(f"horizon {horizon} exceeds trajectory length {len(trajectory)}")
        forecast, _ = node_solve(self, trajectory.states[0], trajectory.times[:horizon])
        return forecast.detach().numpy()

    def training_loss(self, batch: Sequence[Trajectory], horizon: int, observed_fraction: float,
                      rng: Seed) -> Tuple[torch.Tensor, int]:
        """Batched integration from each first point over the shared grid.

        Only sampled points and observed features enter the mean.
        """
        horizon = min(horizon, min(len(t) for t in batch))
        times = shared_times(batch, horizon)
        truth = stack_states(batch, 0, horizon)
        weights = observation_weights(batch, horizon, observed_fraction, rng)
        forecast, result = node_solve(self, truth[:, 0, :], times)
        return mse_loss(forecast, truth, weights), result.nfe


def node_solve(model: NodeModel, x0, eval_times) -> Tuple[torch.Tensor, SolveResult]:
    """Forecast ``(..., K, D)`` plus the solver statistics"""
    x0 = as_tensor(x0)
    if x0.shape[-1:] != (model.dim,):
        raise ValidationError(f"initial state dimension {tuple(x0.shape)} does not match model dimension {model.dim}")
    result = integrate_adaptive(model.tableau, model.controller, model.vector_field, x0, eval_times)
    return result.states.movedim(0, -2), result


def node_forecast(model: NodeModel, x0, eval_times) -> torch.Tensor:
    forecast, _ = node_solve(model, x0, eval_times)
    return forecast
