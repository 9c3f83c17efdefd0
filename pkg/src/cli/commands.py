"""Command implementations behind the ``pc-corrector`` CLI.

Every command takes a resolved :class:`RunConfig`, works inside
``config.output_dir`` and returns a dict of the files it wrote.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from torch import nn

from src.config.run_config import RunConfig
from src.config.settings import settings
from src.core.errors import ValidationError
from src.data.dataset import Dataset
from src.data.generation import check_positivity, generate_dataset, is_positive_system, split_train_test
from src.data.io import MANIFEST, read_dataset, write_dataset
from src.data.sampling import mask_features
from src.data.systems import get_system
from src.data.windows import load_csv_dataset, windows_from_trajectories
from src.evaluation.plots import plot_nfe
from src.evaluation.report import EvalReport, evaluate_bundles, write_report
from src.models.bundles import ForecastBundle, extract_forecast_bundles
from src.models.checkpoints import (
    build_predictor,
    load_corrector,
    load_predictor,
    save_corrector,
    save_predictor,
)
from src.monitoring.metrics import track_time
from src.training.corrector_training import train_corrector
from src.training.loop import TrainingLog
from src.training.predictor_training import train_predictor

logger = logging.getLogger(__name__)

PREDICTOR_FILE = "predictor.json"
CORRECTOR_FILE = "corrector.json"
PREDICTOR_LOG = "predictor_log.csv"
CORRECTOR_LOG = "corrector_log.csv"


@dataclass
class RunData:
    train: Dataset
    test: Dataset
    windowed: bool = False


def write_config(config: RunConfig, directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "config.json"
    path.write_text(json.dumps(config.echo(), indent=2, sort_keys=True) + "\n")
    return path


def build_dataset(config: RunConfig) -> Dataset:
    """Synthetic dataset for ``config.system``, with feature masking applied when configured"""
    system = config.system
    spec = get_system(system.name, n_trajectories=system.n_trajectories, timesteps=system.timesteps, dt=system.dt)
    dataset = generate_dataset(spec, config.seed, settings.workers)
    if is_positive_system(spec):
        check_positivity(dataset)
    if system.point_mask_fraction > 0:
        masked = [
            mask_features(t, system.point_mask_fraction, np.random.default_rng([config.seed, i]))
            for i, t in enumerate(dataset)
        ]
        dataset = Dataset(masked, split=dataset.split,
                          provenance={**dataset.provenance, "point_mask_fraction": system.point_mask_fraction})
    return dataset


def data_dir(config: RunConfig) -> Path:
    return config.output_path / "data"


def prepare_data(config: RunConfig) -> RunData:
    """Train/test data: CSV windows, previously generated files, or a fresh synthetic dataset"""
    system = config.system
    if system.csv_path is not None:
        windows = load_csv_dataset(system.csv_path, system.lookback, system.horizon)
        train, val, test = windows.split()
        if len(train) == 0 or len(test) == 0:
            raise ValidationError(f"{system.csv_path}: too few windows for a train/test split")
        merged = Dataset(train.as_dataset().trajectories + val.as_dataset().trajectories, split="train",
                         provenance=train.as_dataset().provenance)
        return RunData(merged, test.as_dataset("test"), windowed=True)

    directory = data_dir(config)
    if (directory / "train" / MANIFEST).exists() and (directory / "test" / MANIFEST).exists():
        return RunData(read_dataset(directory / "train"), read_dataset(directory / "test"))
    train, test = split_train_test(build_dataset(config), system.train_ratio, config.seed)
    return RunData(train, test)


@track_time("generate")
def cmd_generate(config: RunConfig) -> Dict[str, Path]:
    if config.system.csv_path is not None:
        raise ValidationError("generate works on synthetic systems; csv_path is set")
    dataset = build_dataset(config)
    train, test = split_train_test(dataset, config.system.train_ratio, config.seed)
    directory = data_dir(config)
    written = {
        "all": write_dataset(dataset, directory / "all"),
        "train": write_dataset(train, directory / "train"),
        "test": write_dataset(test, directory / "test"),
        "config": write_config(config, config.output_path),
    }
    logger.info(f"Generated {len(dataset)} trajectories ({len(train)} train / {len(test)} test) in {directory}")
    return written


def fit_predictor(config: RunConfig, data: RunData) -> Tuple[nn.Module, TrainingLog]:
    kind = config.predictor.kind
    system = config.system
    model = build_predictor(kind, data.train.dim, config.predictor, system.lookback, system.horizon, config.seed)
    if kind == "dlinear":
        train = data.train if data.windowed else windows_from_trajectories(
            data.train, system.lookback, system.horizon).as_dataset("train")
        log = train_predictor(model, train, config.predictor_training, horizon=system.horizon, seed=config.seed)
    else:
        log = train_predictor(model, data.train, config.predictor_training,
                              config.regularization.observed_fraction, seed=config.seed)
    return model, log


@track_time("train-predictor")
def cmd_train_predictor(config: RunConfig) -> Dict[str, Path]:
    data = prepare_data(config)
    model, log = fit_predictor(config, data)
    out = config.output_path
    return {
        "checkpoint": save_predictor(model, out / PREDICTOR_FILE),
        "log": log.write_csv(out / PREDICTOR_LOG),
        "config": write_config(config, out),
    }


def bundle_horizon(predictor: nn.Module, dataset: Dataset, requested: Optional[int] = None) -> int:
    available = dataset.min_length - predictor.forecast_offset
    if predictor.kind == "dlinear":
        available = min(available, predictor.horizon)
    if requested is None:
        return available
    if requested > available:
        raise ValidationError(f"horizon {requested} exceeds the {available} forecastable points")
    return requested


def fit_corrector(config: RunConfig, predictor: nn.Module, data: RunData) -> Tuple[nn.Module, TrainingLog]:
    horizon = bundle_horizon(predictor, data.train, config.corrector_training.train_horizon)
    bundles = extract_forecast_bundles(predictor, data.train, horizon, settings.workers)
    return train_corrector(bundles, config.corrector, config.regularization, config.corrector_training, config.seed)


@track_time("train-corrector")
def cmd_train_corrector(config: RunConfig, predictor_path: Optional[Path] = None) -> Dict[str, Path]:
    out = config.output_path
    predictor = load_predictor(predictor_path or out / PREDICTOR_FILE)
    data = prepare_data(config)
    corrector, log = fit_corrector(config, predictor, data)
    written = {
        "checkpoint": save_corrector(corrector, out / CORRECTOR_FILE),
        "log": log.write_csv(out / CORRECTOR_LOG),
        "config": write_config(config, out),
    }
    if config.evaluation.plots:
        written["nfe_svg"] = plot_nfe(out / "nfe.svg", {"corrector": [e.nfe for e in log.epochs]})
    return written


def evaluation_bundles(predictor: nn.Module, test: Dataset) -> List[ForecastBundle]:
    """Forecasts over every forecastable test point"""
    return extract_forecast_bundles(predictor, test, bundle_horizon(predictor, test), settings.workers)


def evaluate_models(config: RunConfig, predictor: nn.Module, corrector: nn.Module, test: Dataset,
                    log: Optional[TrainingLog] = None) -> EvalReport:
    bundles = evaluation_bundles(predictor, test)
    return evaluate_bundles(bundles, corrector, config.evaluation, log, config.echo())


@track_time("evaluate")
def cmd_evaluate(config: RunConfig, predictor_path: Optional[Path] = None,
                 corrector_path: Optional[Path] = None) -> Dict[str, Path]:
    out = config.output_path
    predictor = load_predictor(predictor_path or out / PREDICTOR_FILE)
    corrector = load_corrector(corrector_path or out / CORRECTOR_FILE)
    data = prepare_data(config)
    log_path = out / CORRECTOR_LOG
    log = TrainingLog.read_csv(log_path, "corrector") if log_path.exists() else None
    report = evaluate_models(config, predictor, corrector, data.test, log)
    written = write_report(report, out / "eval", config.evaluation.plots)
    written["config"] = write_config(config, out)
    return written
