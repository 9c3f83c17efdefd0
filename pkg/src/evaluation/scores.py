"""Forecast scores: cumulative MSE, reductions, extrapolation horizon, Pareto fronts."""

import math
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from src.core.errors import ValidationError

NO_HORIZON = 0


def _pair(pred, truth) -> Tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValidationError(f"shape mismatch {pred.shape} vs {truth.shape}")
    return pred, truth


def cumulative_mse(pred, truth, cutoff: int, weights=None) -> float:
    """Mean squared error over timesteps ``0..cutoff`` inclusive.

    Arrays are ``(T, D)`` or ``(N, T, D)``; the time axis is second to last.
    """
    pred, truth = _pair(pred, truth)
    length = pred.shape[-2]
    if cutoff < 0 or cutoff >= length:
        raise ValidationError(f"cutoff {cutoff} outside [0, {length - 1}]")
    sq = (pred[..., :cutoff + 1, :] - truth[..., :cutoff + 1, :]) ** 2
    if weights is None:
        return float(sq.mean())
    w = np.broadcast_to(np.asarray(weights, dtype=np.float64), pred.shape)[..., :cutoff + 1, :]
    total = w.sum()
    if total <= 0:
        raise ValidationError("no observed entries up to the cutoff")
    return float((sq * w).sum() / total)


def reduction_percent(mse_without: float, mse_with: float) -> float:
    if mse_without == 0:
        raise ValidationError("reduction is undefined when the uncorrected MSE is zero")
    return 100.0 * (mse_without - mse_with) / mse_without


def extrapolation_horizon(curve: Mapping[int, float], threshold: float = 3.0) -> int:
    """Largest cutoff whose reduction is at least ``threshold`` percent; ``NO_HORIZON`` when none is"""
    if not curve:
        raise ValidationError("empty reduction curve")
    qualifying = [cutoff for cutoff, reduction in curve.items() if reduction >= threshold]
    return max(qualifying) if qualifying else NO_HORIZON


def reduction_curve(corrected, uncorrected, truth, cutoffs: Sequence[int], weights=None) -> Dict[int, float]:
    return {
        int(c): reduction_percent(cumulative_mse(uncorrected, truth, c, weights),
                                  cumulative_mse(corrected, truth, c, weights))
        for c in cutoffs
    }


def scan_cutoffs(length: int, start: int, step: int = 5) -> List[int]:
    """``start, start + step, ...`` up to the last valid cutoff ``length - 1``"""
    if step < 1:
        raise ValidationError(f"scan step must be positive, got {step}")
    return list(range(start, length, step))


def pareto_points(runs: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
    """Runs not dominated in (lower NFE, higher horizon), in input order"""
    if not runs:
        raise ValidationError("no runs")
    front = []
    for i, (nfe, horizon) in enumerate(runs):
        dominated = any(
            other_nfe <= nfe and other_horizon >= horizon and (other_nfe < nfe or other_horizon > horizon)
            for j, (other_nfe, other_horizon) in enumerate(runs) if j != i
        )
        if not dominated:
            front.append((nfe, horizon))
    return front


def stress_curve(corrected, uncorrected, truth, max_cutoff: int = 400,
                 step: int = 5) -> Dict[str, List[float]]:
    """Natural-log cumulative MSE for both variants, each point computed from timestep 0"""
    corrected, truth = _pair(corrected, truth)
    uncorrected, _ = _pair(uncorrected, truth)
    length = truth.shape[-2]
    if length < max_cutoff:
        raise ValidationError(f"trajectories of length {length} are too short for cutoff {max_cutoff}")
    cutoffs = list(range(step, max_cutoff, step)) + [min(max_cutoff, length - 1)]
    return {
        "cutoff": [float(c) for c in cutoffs],
        "corrected": [_log(cumulative_mse(corrected, truth, c)) for c in cutoffs],
        "uncorrected": [_log(cumulative_mse(uncorrected, truth, c)) for c in cutoffs],
    }


def _log(value: float) -> float:
    return math.log(value) if value > 0 else -math.inf


def mae(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.abs(pred - truth).mean())
