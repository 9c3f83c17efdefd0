import math
from dataclasses import dataclass
from typing import Tuple

import torch

from src.core.errors import ValidationError


@dataclass(frozen=True)
class StepController:
    """PID step-size control under a mixed rtol/atol RMS norm.

    Gains are numerators; each is divided by the local error order of the
    embedded method when a step is proposed.
    """
    rtol: float = 1e-3
    atol: float = 1e-6
    h0: float = 1e-3
    min_step: float = 1e-12
    max_step: float = math.inf
    safety: float = 0.9
    beta1: float = 0.49
    beta2: float = 0.34
    beta3: float = 0.10
    factor_min: float = 0.1
    factor_max: float = 10.0
    max_steps: int = 100_000

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0 and self.h0 > 0):
            raise ValidationError(f"rtol, atol and h0 must be positive (got {self.rtol}, {self.atol}, {self.h0})")
        if not (0 < self.min_step <= self.max_step):
            raise ValidationError("min_step must be positive and not exceed max_step")

    def error_norm(self, error: torch.Tensor, y: torch.Tensor, y_next: torch.Tensor) -> float:
        if error.numel() == 0:
            return 0.0
        with torch.no_grad():
            scale = self.atol + self.rtol * torch.maximum(y.detach().abs(), y_next.detach().abs())
            ratio = error.detach() / scale
            return float(torch.sqrt(torch.mean(ratio * ratio)))

    def to_dict(self) -> dict:
        """Step-size settings for checkpoints; an unbounded ``max_step`` is stored as None"""
        return {
            "rtol": self.rtol, "atol": self.atol, "h0": self.h0, "min_step": self.min_step,
            "max_step": None if math.isinf(self.max_step) else self.max_step, "max_steps": self.max_steps,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StepController":
        data = dict(data)
        if data.get("max_step") is None:
            data["max_step"] = math.inf
        return cls(**data)


@dataclass(frozen=True)
class PidState:
    """Error norms of the two most recently accepted steps"""
    prev_error: float = 1.0
    prev_prev_error: float = 1.0


def pid_next_step(controller: StepController, state: PidState, error_norm: float, h: float,
                  error_order: int = 5) -> Tuple[bool, float, PidState]:
    """Accept or reject a step and propose the next step size.

    Returns ``(accepted, h_next, state_next)``; the state only advances on
    accepted steps.
    """
    if error_norm < 0 or math.isnan(error_norm):
        raise ValidationError(f"error norm must be non-negative, got {error_norm}")
    k = float(error_order)
    accepted = error_norm <= 1.0

    if error_norm == 0.0:
        factor = controller.factor_max
    else:
        inv = 1.0 / error_norm
        factor = (
            controller.safety
            * inv ** (controller.beta1 / k)
            * state.prev_error ** (controller.beta2 / k)
            * (1.0 / state.prev_prev_error) ** (controller.beta3 / k)
        )
    if not accepted:
        factor = min(factor, 1.0)
    factor = min(controller.factor_max, max(controller.factor_min, factor))
    h_next = min(controller.max_step, max(controller.min_step, h * factor))

    if accepted:
        # floor keeps later powers finite after an exact step
        state = PidState(prev_error=max(error_norm, 1e-10), prev_prev_error=state.prev_error)
    return accepted, h_next, state
