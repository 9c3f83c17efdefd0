import logging
from typing import Optional, Tuple

from torch import nn

from src.config.run_config import PredictorConfig, TrainingConfig
from src.core.errors import ValidationError
from src.data.dataset import Dataset
from src.data.windows import WindowSet
from src.models.checkpoints import build_predictor
from src.models.dlinear import DLinearModel
from src.models.node import NodeModel
from src.models.rnn import RnnModel
from src.training.loop import Trainer, TrainingLog, validation_split

logger = logging.getLogger(__name__)


def train_predictor(model: nn.Module, train: Dataset, config: TrainingConfig, observed_fraction: float = 1.0,
                    horizon: Optional[int] = None, seed: int = 0) -> TrainingLog:
    """Fit any predictor on its own ``training_loss``.

    A ``config.val_fraction`` share of ``train`` is held out for early
    stopping; validation uses every observed point.
    """
    if len(train) == 0:
        raise ValidationError("cannot train on an empty dataset")
    horizon = horizon or config.train_horizon
    needed = model.forecast_offset + (0 if model.kind == "dlinear" else horizon)
    if needed > train.min_length:
        raise ValidationError(f"training horizon {horizon} exceeds trajectory length {train.min_length}")

    fit_idx, val_idx = validation_split(len(train), config.val_fraction, seed)
    fit_set = train.subset(fit_idx, "train")
    val_set = train.subset(val_idx, "validation") if len(val_idx) else None
    logger.info(f"Training {model.kind} predictor on {len(fit_set)} trajectories "
                f"({0 if val_set is None else len(val_set)} held out), horizon {horizon}")

    def batch_loss(batch, rng):
        return model.training_loss(batch, horizon, observed_fraction, rng)

    val_loss = None
    if val_set is not None:
        def val_loss() -> float:
            loss, _ = model.training_loss(list(val_set), horizon, 1.0, seed)
            return float(loss)

    trainer = Trainer(model, config, "predictor", seed)
    return trainer.fit(list(fit_set), batch_loss, val_loss)


def train_node(train: Dataset, config: TrainingConfig, predictor: Optional[PredictorConfig] = None,
               observed_fraction: float = 1.0, seed: int = 0) -> Tuple[NodeModel, TrainingLog]:
    model = build_predictor("node", train.dim, predictor or PredictorConfig(), seed=seed)
    log = train_predictor(model, train, config, observed_fraction, seed=seed)
    return model, log


def train_dlinear(windows: WindowSet, config: TrainingConfig, predictor: Optional[PredictorConfig] = None,
                  seed: int = 0) -> Tuple[DLinearModel, TrainingLog]:
    model = build_predictor("dlinear", windows.dim, predictor or PredictorConfig(kind="dlinear"),
                            lookback=windows.lookback, horizon=windows.horizon, seed=seed)
    log = train_predictor(model, windows.as_dataset("train"), config, horizon=windows.horizon, seed=seed)
    return model, log


def train_rnn(train: Dataset, config: TrainingConfig, predictor: Optional[PredictorConfig] = None,
              observed_fraction: float = 1.0, seed: int = 0) -> Tuple[RnnModel, TrainingLog]:
    model = build_predictor("rnn", train.dim, predictor or PredictorConfig(kind="rnn"), seed=seed)
    log = train_predictor(model, train, config, observed_fraction, seed=seed)
    return model, log
