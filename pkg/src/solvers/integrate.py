"""Explicit Runge-Kutta integration with step landing on requested times.

``f`` is called as ``f(t, y)`` with ``t`` a Python float and ``y`` a tensor
of any shape; batched states count as one evaluation per call. Step sizes
are plain floats computed from detached error norms, so gradients flow only
through the recorded stage arithmetic.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import torch

from src.core.errors import NonFiniteError, StepSizeUnderflowError, ValidationError
from src.core.tensor import as_tensor, is_recording
from src.monitoring.metrics import metrics_collector
from src.solvers.controller import PidState, StepController, pid_next_step
from src.solvers.tableaus import ButcherTableau, get_tableau

logger = logging.getLogger(__name__)

VectorField = Callable[[float, torch.Tensor], torch.Tensor]

# Rejections in a row that trigger a warning
_REJECTION_STORM = 20


@dataclass
class StepRecord:
    t: float
    h: float
    y: torch.Tensor


@dataclass
class SolveResult:
    times: List[float]
    states: torch.Tensor  # (len(times), *y0.shape)
    nfe: int = 0
    accepted: int = 0
    rejected: int = 0
    trace: List[StepRecord] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return self.accepted + self.rejected


def _check_times(eval_times: Union[Sequence[float], torch.Tensor]) -> List[float]:
    times = [float(t) for t in (eval_times.tolist() if isinstance(eval_times, torch.Tensor) else eval_times)]
    if len(times) < 1:
        raise ValidationError("at least one evaluation time is required")
    if any(not math.isfinite(t) for t in times):
        raise ValidationError("evaluation times must be finite")
    if any(b <= a for a, b in zip(times[:-1], times[1:])):
        raise ValidationError("evaluation times must be strictly increasing")
    return times


def rk_step(tableau: ButcherTableau, f: VectorField, t: float, y: torch.Tensor,
            h: float) -> Tuple[torch.Tensor, torch.Tensor]:
    """One explicit RK step; returns ``(y_next, error_estimate)``.

    The error estimate is ``h * sum((b - b_hat) * k)`` and is an empty tensor
    for methods without an embedded pair.
    """
    if not h > 0:
        raise ValidationError(f"step size must be positive, got {h}")
    k: List[torch.Tensor] = []
    for i in range(tableau.stages):
        yi = y
        for a_ij, k_j in zip(tableau.a[i], k):
            if a_ij != 0.0:
                yi = yi + (h * a_ij) * k_j
        ki = f(t + tableau.c[i] * h, yi)
        if not bool(torch.isfinite(ki).all()):
            raise NonFiniteError(f"non-finite stage {i} at t={t:.6g}, h={h:.3g}")
        k.append(ki)

    y_next = y
    for b_i, k_i in zip(tableau.b, k):
        if b_i != 0.0:
            y_next = y_next + (h * b_i) * k_i

    if not tableau.is_adaptive:
        return y_next, y.new_zeros(0)
    error = torch.zeros_like(y)
    for e_i, k_i in zip(tableau.error_weights, k):
        if e_i != 0.0:
            error = error + (h * e_i) * k_i
    return y_next, error


def integrate_fixed(tableau: ButcherTableau, f: VectorField, y0: torch.Tensor,
                    eval_times: Union[Sequence[float], torch.Tensor], h: float,
                    solver_name: Optional[str] = None) -> SolveResult:
    """Fixed-step stepping; each interval is split into equal steps no longer than ``h``"""
    if not h > 0:
        raise ValidationError(f"step size must be positive, got {h}")
    times = _check_times(eval_times)
    y = as_tensor(y0)
    recording = is_recording()
    result = SolveResult(times=times, states=y.new_zeros(0))
    outputs = [y]

    for t_start, t_end in zip(times[:-1], times[1:]):
        span = t_end - t_start
        n = max(1, math.ceil(span / h - 1e-9))
        step = span / n
        for j in range(n):
            t = t_start + j * step
            y, _ = rk_step(tableau, f, t, y, step)
            result.nfe += tableau.stages
            result.accepted += 1
            if recording:
                result.trace.append(StepRecord(t=t, h=step, y=y))
        outputs.append(y)

    result.states = torch.stack(outputs)
    metrics_collector.track_solve(solver_name or tableau.name, result.nfe, result.accepted, 0)
    return result


def integrate_adaptive(tableau: ButcherTableau, controller: StepController, f: VectorField,
                       y0: torch.Tensor, eval_times: Union[Sequence[float], torch.Tensor]) -> SolveResult:
    """Integrate ``dy/dt = f(t, y)`` and return the state at every evaluation time.

    Steps are clipped to land exactly on each evaluation time; the proposal
    made before clipping is kept for the following step. Methods without an
    embedded pair fall back to fixed stepping at ``controller.h0``.
    """
    if not tableau.is_adaptive:
        return integrate_fixed(tableau, f, y0, eval_times, controller.h0)

    times = _check_times(eval_times)
    y = as_tensor(y0)
    recording = is_recording()
    result = SolveResult(times=times, states=y.new_zeros(0))
    outputs = [y]

    t = times[0]
    h = min(controller.h0, controller.max_step)
    pid = PidState()
    rejected_in_row = 0
    order = tableau.error_order

    for target in times[1:]:
        while t < target:
            if result.steps >= controller.max_steps:
                logger.error(f"{tableau.name}: exceeded {controller.max_steps} steps at t={t:.6g}")
                raise StepSizeUnderflowError(
                    f"{tableau.name} exceeded max_steps={controller.max_steps} at t={t:.6g}"
                )
            remaining = target - t
            landing = h >= remaining * (1.0 - 1e-12)
            h_step = remaining if landing else h

            y_next, error = rk_step(tableau, f, t, y, h_step)
            result.nfe += tableau.stages
            err = controller.error_norm(error, y, y_next)
            if not math.isfinite(err):
                raise NonFiniteError(f"non-finite error estimate at t={t:.6g}")
            accepted, h_next, pid = pid_next_step(controller, pid, err, h_step, order)

            if accepted:
                result.accepted += 1
                rejected_in_row = 0
                t = target if landing else t + h_step
                y = y_next
                if recording:
                    result.trace.append(StepRecord(t=t, h=h_step, y=y))
                h = max(h_next, h) if landing else h_next
            else:
                result.rejected += 1
                rejected_in_row += 1
                if rejected_in_row == _REJECTION_STORM:
                    logger.warning(f"{tableau.name}: {rejected_in_row} consecutive rejections near t={t:.6g}")
                if h_step <= controller.min_step:
                    logger.error(f"{tableau.name}: step size underflow at t={t:.6g} (h={h_step:.3g})")
                    raise StepSizeUnderflowError(f"step size underflow at t={t:.6g}")
                h = h_next
        outputs.append(y)

    result.states = torch.stack(outputs)
    metrics_collector.track_solve(tableau.name, result.nfe, result.accepted, result.rejected)
    return result


def solve(solver: str, f: VectorField, y0: torch.Tensor, eval_times: Union[Sequence[float], torch.Tensor],
          controller: Optional[StepController] = None) -> SolveResult:
    """Integrate with a solver looked up by name"""
    return integrate_adaptive(get_tableau(solver), controller or StepController(), f, y0, eval_times)
