import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from torch import nn

from src.config.run_config import EvaluationConfig
from src.core.errors import ValidationError
from src.evaluation import plots
from src.evaluation.scores import (
    cumulative_mse,
    extrapolation_horizon,
    mae,
    reduction_curve,
    reduction_percent,
    scan_cutoffs,
    stress_curve,
)
from src.models.bundles import ForecastBundle, stack_bundles
from src.models.corrector import correct, predict_errors
from src.training.loop import TrainingLog

logger = logging.getLogger(__name__)


class CutoffRow(BaseModel):
    cutoff: int
    mse_without: float
    mse_with: float
    reduction_percent: float


class EvalReport(BaseModel):
    """Scores of one corrector on one set of forecast bundles"""
    n_trajectories: int
    length: int
    threshold: float
    interpolation_cutoff: int
    interpolation_mse_without: float
    interpolation_mse_with: float
    interpolation_reduction: float
    extrapolation_horizon: int
    mae_without: float
    mae_with: float
    cutoffs: List[CutoffRow] = Field(default_factory=list)
    stress: Optional[Dict[str, List[float]]] = None
    nfe_log: List[float] = Field(default_factory=list)
    wall_clock: List[float] = Field(default_factory=list)
    config: dict = Field(default_factory=dict)

    def reduction_by_cutoff(self) -> Dict[int, float]:
        return {row.cutoff: row.reduction_percent for row in self.cutoffs}


def evaluate_arrays(forecast: np.ndarray, corrected: np.ndarray, truth: np.ndarray,
                    evaluation: EvaluationConfig, weights: Optional[np.ndarray] = None) -> EvalReport:
    """Scores over stacked ``(N, T, D)`` arrays"""
    length = truth.shape[-2]
    cutoff = evaluation.interpolation_cutoff
    if cutoff >= length:
        raise ValidationError(f"interpolation cutoff {cutoff} needs trajectories longer than {length}")
    grid = sorted(set(scan_cutoffs(length, evaluation.scan_step, evaluation.scan_step)) | {cutoff})
    curve = reduction_curve(corrected, forecast, truth, grid, weights)
    rows = [
        CutoffRow(cutoff=c, mse_without=cumulative_mse(forecast, truth, c, weights),
                  mse_with=cumulative_mse(corrected, truth, c, weights), reduction_percent=curve[c])
        for c in grid
    ]
    interp = next(r for r in rows if r.cutoff == cutoff)
    stress = None
    if evaluation.stress_cutoff is not None:
        stress = stress_curve(corrected, forecast, truth, evaluation.stress_cutoff, evaluation.scan_step)
    return EvalReport(
        n_trajectories=truth.shape[0],
        length=length,
        threshold=evaluation.threshold,
        interpolation_cutoff=cutoff,
        interpolation_mse_without=interp.mse_without,
        interpolation_mse_with=interp.mse_with,
        interpolation_reduction=reduction_percent(interp.mse_without, interp.mse_with),
        extrapolation_horizon=extrapolation_horizon(curve, evaluation.threshold),
        mae_without=mae(forecast, truth),
        mae_with=mae(corrected, truth),
        cutoffs=rows,
        stress=stress,
    )


def evaluate_bundles(bundles: Sequence[ForecastBundle], corrector: nn.Module, evaluation: EvaluationConfig,
                     training_log: Optional[TrainingLog] = None, config: Optional[dict] = None) -> EvalReport:
    """Correct every bundle over its full length and score against the truth.

    Inference uses the whole regular forecast as control path.
    """
    if not bundles:
        raise ValidationError("no bundles to evaluate")
    length = min(len(b) for b in bundles)
    predicted = predict_errors(corrector, bundles, length=length)
    forecast = stack_bundles(bundles, "forecast", length)
    truth = stack_bundles(bundles, "truth", length)
    weights = stack_bundles(bundles, "observed", length).astype(np.float64)
    corrected = correct(forecast, np.stack(predicted))
    report = evaluate_arrays(forecast, corrected, truth, evaluation, weights)
    if training_log is not None:
        report.nfe_log = [e.nfe for e in training_log.epochs]
        report.wall_clock = [e.wall_clock for e in training_log.epochs]
    report.config = config or {}
    logger.info(
        f"Interpolation 0-{report.interpolation_cutoff}: w/o={report.interpolation_mse_without:.4g} "
        f"w/={report.interpolation_mse_with:.4g} ({report.interpolation_reduction:.1f}%), "
        f"extrapolation horizon {report.extrapolation_horizon}"
    )
    return report


def write_report(report: EvalReport, directory: Union[str, Path], plots_enabled: bool = True) -> Dict[str, Path]:
    """``report.json``, ``report.csv`` (one row per cutoff), and optional stress CSV and SVG plots"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = {}

    written["json"] = directory / "report.json"
    written["json"].write_text(json.dumps(report.model_dump(mode="json"), indent=2, sort_keys=True))

    frame = pd.DataFrame([r.model_dump() for r in report.cutoffs],
                         columns=["cutoff", "mse_without", "mse_with", "reduction_percent"])
    written["csv"] = directory / "report.csv"
    frame.to_csv(written["csv"], index=False, float_format="%.17g", lineterminator="\n")

    if report.stress is not None:
        written["stress_csv"] = directory / "stress.csv"
        pd.DataFrame(report.stress).to_csv(written["stress_csv"], index=False, float_format="%.17g",
                                           lineterminator="\n")

    if plots_enabled:
        written["reduction_svg"] = plots.plot_reduction(
            directory / "reduction.svg", [r.cutoff for r in report.cutoffs],
            [r.reduction_percent for r in report.cutoffs], report.threshold)
        if report.stress is not None:
            written["stress_svg"] = plots.plot_stress(directory / "stress.svg", report.stress)
        if report.nfe_log:
            written["nfe_svg"] = plots.plot_nfe(directory / "nfe.svg", {"corrector": report.nfe_log})

    logger.info(f"Wrote evaluation report to {directory}")
    return written
