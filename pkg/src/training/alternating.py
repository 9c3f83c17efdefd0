"""Joint training where predictor and corrector take turns.

Each round runs ``predictor_steps`` Adam updates on the predictor, rebuilds
the forecast bundles from the updated predictor, then runs
``corrector_steps`` updates on the corrector.
"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from torch import nn

from src.config.run_config import AlternatingConfig, RegularizationConfig, TrainingConfig
from src.core.errors import ValidationError
from src.data.dataset import Dataset
from src.models.bundles import extract_forecast_bundles
from src.models.mlp_corrector import MlpCorrectorModel
from src.monitoring.metrics import metrics_collector
from src.training.corrector_training import corrector_batch_loss, mlp_batch_loss
from src.training.loop import Trainer

logger = logging.getLogger(__name__)


class RoundLog(BaseModel):
    round: int
    predictor_loss: Optional[float] = None
    corrector_loss: Optional[float] = None
    corrector_nfe: Optional[float] = None
    wall_clock: float = 0.0


class AlternatingLog(BaseModel):
    rounds: List[RoundLog] = Field(default_factory=list)


def train_alternating(predictor: nn.Module, corrector: nn.Module, train: Dataset, schedule: AlternatingConfig,
                      predictor_training: TrainingConfig, corrector_training: TrainingConfig,
                      reg: RegularizationConfig, seed: int = 0,
                      workers: Optional[int] = None) -> Tuple[nn.Module, nn.Module, AlternatingLog]:
    if len(train) == 0:
        raise ValidationError("cannot train on an empty dataset")
    horizon = corrector_training.train_horizon
    if predictor.forecast_offset + horizon > train.min_length:
        raise ValidationError(f"corrector horizon {horizon} exceeds trajectory length {train.min_length}")

    rng = np.random.default_rng(seed)
    predictor_trainer = Trainer(predictor, predictor_training, "predictor", seed)
    corrector_trainer = Trainer(corrector, corrector_training, "corrector", seed + 1)
    trajectories = list(train)
    log = AlternatingLog()

    def sample(items, size):
        idx = rng.choice(len(items), size=min(size, len(items)), replace=False)
        return [items[i] for i in np.sort(idx)]

    for r in range(1, schedule.rounds + 1):
        start = metrics_collector.start_timer("alternating_round")
        entry = RoundLog(round=r)

        losses = []
        for _ in range(schedule.predictor_steps):
            batch = sample(trajectories, predictor_training.batch_size)
            loss, _ = predictor_trainer.step(lambda: predictor.training_loss(
                batch, predictor_training.train_horizon, reg.observed_fraction, rng))
            losses.append(loss)
        if losses:
            entry.predictor_loss = float(np.mean(losses))

        if schedule.corrector_steps > 0:
            bundles = extract_forecast_bundles(predictor, train, horizon, workers)
            losses, nfes = [], []
            for _ in range(schedule.corrector_steps):
                batch = sample(bundles, corrector_training.batch_size)
                if isinstance(corrector, MlpCorrectorModel):
                    loss, nfe = corrector_trainer.step(lambda: mlp_batch_loss(corrector, batch, horizon))
                else:
                    loss, nfe = corrector_trainer.step(lambda: corrector_batch_loss(corrector, batch, horizon, reg, rng))
                losses.append(loss)
                nfes.append(nfe)
            entry.corrector_loss = float(np.mean(losses))
            entry.corrector_nfe = float(np.mean(nfes))

        entry.wall_clock = metrics_collector.stop_timer("alternating_round", start)
        log.rounds.append(entry)
        logger.info(
            f"[alternating] round {r}: predictor_loss={_fmt(entry.predictor_loss)} "
            f"corrector_loss={_fmt(entry.corrector_loss)} nfe={_fmt(entry.corrector_nfe)} time={entry.wall_clock:.2f}s"
        )

    return predictor, corrector, log


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None or math.isnan(value) else f"{value:.6g}"
