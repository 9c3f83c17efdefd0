"""Neural CDE corrector.

The hidden state follows ``dz = f(z) dX(s)`` along a control path fitted
through the forecast and its time channel. ``z(t_0) = zeta(x_0, t_0)`` and a
decoder maps every hidden state after the first to a predicted error; the
first predicted error is zero.
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from torch import nn

from src.core.errors import ValidationError
from src.core.tensor import Activation, Mlp, as_tensor, build_mlp
from src.data.sampling import Seed, as_rng, subsample_indices
from src.models.bundles import ForecastBundle
from src.models.mlp_corrector import MlpCorrectorModel, mlp_correct
from src.paths.control_path import ControlPath, Interpolation, fit_path, with_time_channel
from src.solvers.controller import StepController
from src.solvers.integrate import SolveResult, integrate_adaptive
from src.solvers.tableaus import get_tableau

logger = logging.getLogger(__name__)

# decoder name -> (width, depth)
DECODERS: Dict[str, Tuple[int, int]] = {
    "fc20_1": (20, 1),
    "fc100_1": (100, 1),
    "fc400_4": (400, 4),
}

MIN_PATH_KNOTS = 4


class CorrectorModel(nn.Module):
    kind = "ncde"

    def __init__(self, dim: int, hidden: int = 11, zeta_width: int = 50, field_width: int = 400,
                 field_depth: int = 4, field_final_tanh: bool = True, decoder: str = "fc400_4",
                 interpolation: Union[Interpolation, str] = Interpolation.HERMITE, solver: str = "tsit5",
                 controller: Optional[StepController] = None, seed: Optional[int] = None):
        super().__init__()
        if decoder not in DECODERS:
            raise ValidationError(f"unknown decoder '{decoder}', expected one of {sorted(DECODERS)}")
        self.dim = dim
        self.hidden = hidden
        self.zeta_width = zeta_width
        self.field_width = field_width
        self.field_depth = field_depth
        self.field_final_tanh = field_final_tanh
        self.decoder_name = decoder
        self.interpolation = Interpolation(interpolation)
        self.solver = solver
        self.tableau = get_tableau(solver)
        self.controller = controller or StepController()

        def seeded(offset: int) -> Optional[int]:
            return None if seed is None else seed + offset

        channels = dim + 1
        self.zeta = build_mlp([channels, zeta_width, hidden], Activation.RELU, seed=seeded(0))
        self.field = build_mlp(
            [hidden] + [field_width] * field_depth + [hidden * channels],
            Activation.TANH,
            Activation.TANH if field_final_tanh else Activation.IDENTITY,
            seed=seeded(1),
        )
        dec_width, dec_depth = DECODERS[decoder]
        self.decoder = build_mlp([hidden] + [dec_width] * dec_depth + [dim], Activation.RELU, seed=seeded(2))

    @property
    def channels(self) -> int:
        return self.dim + 1

    def networks(self) -> Dict[str, Mlp]:
        return {"zeta": self.zeta, "field": self.field, "decoder": self.decoder}

    def hyperparameters(self) -> dict:
        return {
            "dim": self.dim, "hidden": self.hidden, "zeta_width": self.zeta_width,
            "field_width": self.field_width, "field_depth": self.field_depth,
            "field_final_tanh": self.field_final_tanh, "decoder": self.decoder_name,
            "interpolation": self.interpolation.value, "solver": self.solver,
            "controller": self.controller.to_dict(),
        }


def init_hidden(model: CorrectorModel, x0, t0) -> torch.Tensor:
    x0 = as_tensor(x0)
    if x0.shape[-1:] != (model.dim,):
        raise ValidationError(f"initial forecast dimension {tuple(x0.shape)} does not match corrector dimension {model.dim}")
    t0 = as_tensor(t0)
    t0 = t0.expand(x0.shape[:-1]).unsqueeze(-1) if t0.dim() == 0 else t0.reshape(*x0.shape[:-1], 1)
    return model.zeta(torch.cat([x0, t0], dim=-1))


def cde_vector_field(model: CorrectorModel, path: ControlPath):
    """``f(s, z) = F(z) @ dX/ds`` with ``F(z)`` reshaped to ``(C, D+1)``"""
    if path.channels != model.channels:
        raise ValidationError(f"path has {path.channels} channels, corrector expects {model.channels}")

    def f(s: float, z: torch.Tensor) -> torch.Tensor:
        matrix = model.field(z).reshape(*z.shape[:-1], model.hidden, model.channels)
        dx = path.derivative(s)
        return (matrix @ dx.unsqueeze(-1)).squeeze(-1)

    return f


def cde_integrate(model: CorrectorModel, path: ControlPath,
                  eval_times=None) -> Tuple[torch.Tensor, SolveResult]:
    """Hidden states ``(..., K, C)`` at ``eval_times`` (the knot times by default)"""
    eval_times = path.times if eval_times is None else as_tensor(eval_times)
    if abs(float(eval_times[0]) - path.start) > 1e-12:
        raise ValidationError(f"first evaluation time {float(eval_times[0])} is not the path start {path.start}")
    if float(eval_times[-1]) > path.end + 1e-12:
        raise ValidationError(f"evaluation time {float(eval_times[-1])} beyond the path end {path.end}")
    z0 = init_hidden(model, path.values[..., 0, :-1], path.start)
    result = integrate_adaptive(model.tableau, model.controller, cde_vector_field(model, path), z0, eval_times)
    return result.states.movedim(0, -2), result


def decode_errors(model: CorrectorModel, hidden: torch.Tensor) -> torch.Tensor:
    if hidden.shape[-1:] != (model.hidden,):
        raise ValidationError(f"hidden width {tuple(hidden.shape)} does not match corrector width {model.hidden}")
    rest = model.decoder(hidden[..., 1:, :])
    first = rest.new_zeros(*hidden.shape[:-2], 1, model.dim)
    return torch.cat([first, rest], dim=-2)


def corrector_pass(model: CorrectorModel, times, forecast) -> Tuple[torch.Tensor, int]:
    """Predicted errors ``(..., K, D)`` for a forecast over ``times`` and the NFE it took"""
    times, forecast = as_tensor(times), as_tensor(forecast)
    if times.shape[0] < 2:
        raise ValidationError("a forecast needs at least 2 points to be corrected")
    path = fit_path(times, with_time_channel(times, forecast), model.interpolation)
    hidden, result = cde_integrate(model, path, times)
    return decode_errors(model, hidden), result.nfe


def corrector_forward(model: CorrectorModel, times, forecast) -> torch.Tensor:
    errors, _ = corrector_pass(model, times, forecast)
    return errors


def correct(forecast, predicted_errors):
    if tuple(forecast.shape) != tuple(predicted_errors.shape):
        raise ValidationError(f"forecast {tuple(forecast.shape)} and errors {tuple(predicted_errors.shape)} differ in shape")
    return forecast + predicted_errors


def sample_tail_drop(eta: int, length: int, seed: Seed) -> int:
    """Number of trailing forecasts to drop, uniform on ``{0, ..., eta}``"""
    if eta < 0 or eta > length - MIN_PATH_KNOTS:
        raise ValidationError(f"eta={eta} outside [0, {length - MIN_PATH_KNOTS}] for a path of {length} points")
    if eta == 0:
        return 0
    return int(as_rng(seed).integers(0, eta + 1))


def sparsify_indices(length: int, kappa: float, seed: Seed) -> np.ndarray:
    """Sorted knot indices keeping ``max(ceil(kappa * length), 4)`` points including index 0"""
    if not 0 < kappa <= 1:
        raise ValidationError(f"kappa must lie in (0, 1], got {kappa}")
    if length < MIN_PATH_KNOTS:
        raise ValidationError(f"sparse control paths need at least {MIN_PATH_KNOTS} knots, got {length}")
    return subsample_indices(length, kappa, seed, minimum=MIN_PATH_KNOTS)


def sparsify_path(times, forecast, kappa: float, seed: Seed) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    times = np.asarray(times, dtype=np.float64)
    forecast = np.asarray(forecast, dtype=np.float64)
    idx = sparsify_indices(times.shape[0], kappa, seed)
    return times[idx], forecast[idx], idx


def predict_errors(model: nn.Module, bundles: Sequence[ForecastBundle],
                   length: Optional[int] = None) -> List[np.ndarray]:
    """Inference over many bundles; bundles with identical times are corrected in one batch"""
    groups: Dict[bytes, List[int]] = {}
    for i, bundle in enumerate(bundles):
        n = len(bundle) if length is None else min(length, len(bundle))
        groups.setdefault(bundle.times[:n].tobytes(), []).append(i)

    out: List[Optional[np.ndarray]] = [None] * len(bundles)
    with torch.no_grad():
        for members in groups.values():
            n = len(bundles[members[0]]) if length is None else min(length, len(bundles[members[0]]))
            times = bundles[members[0]].times[:n]
            forecasts = np.stack([bundles[i].forecast[:n] for i in members])
            if isinstance(model, MlpCorrectorModel):
                predicted = mlp_correct(model, times, forecasts)
            else:
                predicted = corrector_forward(model, times, forecasts)
            for j, i in enumerate(members):
                out[i] = predicted[j].numpy()
    return out
