"""One-parameter sweeps over corrector, solver and training settings.

The predictor is trained (or loaded) once; every sweep value then trains a
fresh corrector on the same forecast bundles and is scored on the same
test set, so rows differ only in the swept setting.
"""

import json
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel
from torch import nn

from src.cli.commands import (
    PREDICTOR_FILE,
    RunData,
    evaluate_models,
    fit_corrector,
    fit_predictor,
    prepare_data,
    write_config,
)
from src.config.run_config import RunConfig
from src.core.errors import ValidationError
from src.evaluation.plots import plot_pareto
from src.evaluation.scores import pareto_points
from src.models.checkpoints import build_corrector, build_predictor, load_predictor
from src.monitoring.metrics import track_time
from src.training.alternating import train_alternating

logger = logging.getLogger(__name__)

# sweep name -> config path it overrides
SWEEP_KEYS: Dict[str, Tuple[str, ...]] = {
    "kappa": ("regularization", "kappa"),
    "eta": ("regularization", "eta"),
    "observed_fraction": ("regularization", "observed_fraction"),
    "solver": ("corrector", "solver", "solver"),
    "interpolation": ("corrector", "interpolation"),
    "decoder": ("corrector", "decoder"),
    "train_horizon": ("corrector_training", "train_horizon"),
    "corrector": ("corrector", "kind"),
    "predictor": ("predictor", "kind"),
    "training": (),
}

DEFAULT_VALUES: Dict[str, List] = {
    "solver": ["euler", "heun", "dopri5", "tsit5"],
    "interpolation": ["hermite", "linear"],
    "decoder": ["fc20_1", "fc100_1", "fc400_4"],
    "corrector": ["ncde", "mlp"],
    "predictor": ["node", "rnn"],
    "training": ["two_stage", "alternating"],
    "kappa": [0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
    "eta": [0, 5, 10, 15, 20],
    "train_horizon": [30, 40, 50, 60],
}

INTEGER_SWEEPS = {"eta", "train_horizon"}
PARETO_SWEEPS = {"kappa", "eta"}


class AblationRow(BaseModel):
    parameter: str
    value: str
    interpolation_reduction: float
    extrapolation_horizon: int
    interpolation_mse_with: float
    interpolation_mse_without: float
    median_nfe: float
    mean_epoch_seconds: float
    final_loss: float
    pareto: bool = False


def parse_values(parameter: str, spec: Optional[str] = None) -> List:
    """Sweep values from ``start:stop:step`` (inclusive), a comma list, or the built-in default"""
    if parameter not in SWEEP_KEYS:
        raise ValidationError(f"unknown sweep '{parameter}', expected one of {sorted(SWEEP_KEYS)}")
    if spec is None:
        if parameter not in DEFAULT_VALUES:
            raise ValidationError(f"sweep '{parameter}' needs explicit values")
        return list(DEFAULT_VALUES[parameter])
    cast: Callable = int if parameter in INTEGER_SWEEPS else float
    if ":" in spec:
        try:
            start, stop, step = (float(p) for p in spec.split(":"))
        except ValueError:
            raise ValidationError(f"range '{spec}' must read start:stop:step")
        if step <= 0 or stop < start:
            raise ValidationError(f"range '{spec}' is empty")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [cast(round(start + k * step, 10)) for k in range(count)]
    values = [v.strip() for v in spec.split(",") if v.strip()]
    if parameter in DEFAULT_VALUES and isinstance(DEFAULT_VALUES[parameter][0], str):
        return values
    try:
        return [cast(v) for v in values]
    except ValueError:
        raise ValidationError(f"sweep '{parameter}' expects numeric values, got '{spec}'")


def _override(parameter: str, value) -> dict:
    path = SWEEP_KEYS[parameter]
    if not path:
        return {}
    nested: dict = {path[-1]: value}
    for key in reversed(path[:-1]):
        nested = {key: nested}
    return nested


def _row(parameter: str, value, config: RunConfig, predictor: nn.Module, corrector: nn.Module,
         data: RunData, log) -> AblationRow:
    report = evaluate_models(config, predictor, corrector, data.test, log)
    nfes = [e.nfe for e in log.epochs]
    seconds = [e.wall_clock for e in log.epochs]
    return AblationRow(
        parameter=parameter,
        value=str(value),
        interpolation_reduction=report.interpolation_reduction,
        extrapolation_horizon=report.extrapolation_horizon,
        interpolation_mse_with=report.interpolation_mse_with,
        interpolation_mse_without=report.interpolation_mse_without,
        median_nfe=float(np.median(nfes)),
        mean_epoch_seconds=float(np.mean(seconds)),
        final_loss=log.final_loss,
    )


def _alternating_row(config: RunConfig, data: RunData) -> AblationRow:
    system = config.system
    predictor = build_predictor(config.predictor.kind, data.train.dim, config.predictor, system.lookback,
                                system.horizon, config.seed)
    corrector = build_corrector(data.train.dim, config.corrector, seed=config.seed)
    predictor, corrector, log = train_alternating(
        predictor, corrector, data.train, config.alternating, config.predictor_training,
        config.corrector_training, config.regularization, config.seed,
    )
    report = evaluate_models(config, predictor, corrector, data.test)
    losses = [r.corrector_loss for r in log.rounds if r.corrector_loss is not None]
    nfes = [r.corrector_nfe for r in log.rounds if r.corrector_nfe is not None]
    return AblationRow(
        parameter="training",
        value="alternating",
        interpolation_reduction=report.interpolation_reduction,
        extrapolation_horizon=report.extrapolation_horizon,
        interpolation_mse_with=report.interpolation_mse_with,
        interpolation_mse_without=report.interpolation_mse_without,
        median_nfe=float(np.median(nfes)) if nfes else 0.0,
        mean_epoch_seconds=float(np.mean([r.wall_clock for r in log.rounds])),
        final_loss=losses[-1] if losses else float("nan"),
    )


def run_sweep(config: RunConfig, parameter: str, values: Sequence,
              predictor: Optional[nn.Module] = None) -> List[AblationRow]:
    data = prepare_data(config)
    if predictor is None and parameter != "predictor":
        path = config.output_path / PREDICTOR_FILE
        predictor = load_predictor(path) if path.exists() else fit_predictor(config, data)[0]

    rows = []
    for value in values:
        logger.info(f"Ablation {parameter}={value}")
        if parameter == "training" and value == "alternating":
            rows.append(_alternating_row(config, data))
            continue
        if parameter == "training" and value != "two_stage":
            raise ValidationError(f"training mode must be two_stage or alternating, got '{value}'")
        run_config = config.merged(_override(parameter, value))
        run_predictor = fit_predictor(run_config, data)[0] if parameter == "predictor" else predictor
        corrector, log = fit_corrector(run_config, run_predictor, data)
        rows.append(_row(parameter, value, run_config, run_predictor, corrector, data, log))

    if parameter in PARETO_SWEEPS:
        front = set(pareto_points([(r.median_nfe, float(r.extrapolation_horizon)) for r in rows]))
        for r in rows:
            r.pareto = (r.median_nfe, float(r.extrapolation_horizon)) in front
    return rows


@track_time("ablate")
def cmd_ablate(config: RunConfig, parameter: str, spec: Optional[str] = None) -> Dict[str, Path]:
    values = parse_values(parameter, spec)
    rows = run_sweep(config, parameter, values)
    out = config.output_path / "ablations"
    out.mkdir(parents=True, exist_ok=True)
    written = {
        "csv": out / f"{parameter}.csv",
        "json": out / f"{parameter}.json",
        "config": write_config(config, out),
    }
    frame = pd.DataFrame([r.model_dump() for r in rows], columns=list(AblationRow.model_fields))
    frame.to_csv(written["csv"], index=False, float_format="%.17g", lineterminator="\n")
    written["json"].write_text(json.dumps([r.model_dump() for r in rows], indent=2, sort_keys=True))
    if parameter in PARETO_SWEEPS and config.evaluation.plots:
        runs = [(r.median_nfe, float(r.extrapolation_horizon)) for r in rows]
        written["pareto_svg"] = plot_pareto(out / f"{parameter}_pareto.svg", runs, pareto_points(runs))
    logger.info(f"Ablation over {parameter}: {len(rows)} runs written to {out}")
    return written
