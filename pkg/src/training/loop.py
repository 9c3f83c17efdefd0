"""Mini-batch Adam training with early stopping and per-epoch logs."""

import logging
import math
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np
import pandas as pd
import torch
from pydantic import BaseModel, Field
from torch import nn

from src.config.run_config import TrainingConfig
from src.core.errors import DivergenceError, NonFiniteError
from src.core.tensor import Tape, adam_step, grad, make_adam
from src.monitoring.metrics import metrics_collector

logger = logging.getLogger(__name__)

T = TypeVar("T")

# batch members, rng -> (loss, nfe)
BatchLoss = Callable[[List, np.random.Generator], Tuple[torch.Tensor, float]]


class EpochLog(BaseModel):
    epoch: int
    train_loss: float
    val_loss: Optional[float] = None
    nfe: float = 0.0
    wall_clock: float = 0.0


class TrainingLog(BaseModel):
    phase: str
    epochs: List[EpochLog] = Field(default_factory=list)
    best_epoch: Optional[int] = None
    best_loss: Optional[float] = None
    stopped_early: bool = False

    @property
    def final_loss(self) -> float:
        return self.epochs[-1].train_loss if self.epochs else math.nan

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([e.model_dump() for e in self.epochs],
                            columns=["epoch", "train_loss", "val_loss", "nfe", "wall_clock"])

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        return path

    @classmethod
    def read_csv(cls, path: Union[str, Path], phase: str) -> "TrainingLog":
        frame = pd.read_csv(path)
        epochs = [
            EpochLog(epoch=int(row.epoch), train_loss=float(row.train_loss),
                     val_loss=None if pd.isna(row.val_loss) else float(row.val_loss),
                     nfe=float(row.nfe), wall_clock=float(row.wall_clock))
            for row in frame.itertuples(index=False)
        ]
        return cls(phase=phase, epochs=epochs)


class EarlyStopping:
    """Keeps a copy of the best parameters seen and signals when patience runs out"""

    def __init__(self, patience: int):
        self.patience = patience
        self.best_loss = math.inf
        self.best_epoch: Optional[int] = None
        self.best_state: Optional[Dict[str, torch.Tensor]] = None
        self.counter = 0

    def update(self, epoch: int, loss: float, model: nn.Module) -> bool:
        if loss < self.best_loss:
            self.best_loss = loss
            self.best_epoch = epoch
            self.best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
            self.counter = 0
            return False
        self.counter += 1
        return self.counter >= self.patience

    def restore(self, model: nn.Module) -> None:
        if self.best_state is not None:
            model.load_state_dict(self.best_state)


def batches(items: Sequence[T], batch_size: int, rng: np.random.Generator) -> List[List[T]]:
    order = rng.permutation(len(items))
    return [[items[i] for i in order[k:k + batch_size]] for k in range(0, len(items), batch_size)]


def validation_split(n: int, fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Shuffled (train, validation) index split; validation is empty when ``fraction`` is 0 or ``n < 2``"""
    n_val = int(round(fraction * n)) if n >= 2 else 0
    if fraction > 0 and n >= 2:
        n_val = min(max(n_val, 1), n - 1)
    order = np.random.default_rng(seed).permutation(n)
    return np.sort(order[n_val:]), np.sort(order[:n_val])


class Trainer:
    """Owns one model's parameters and Adam state."""

    def __init__(self, model: nn.Module, config: TrainingConfig, phase: str, seed: int = 0):
        self.model = model
        self.config = config
        self.phase = phase
        self.seed = seed
        self.params = dict(model.named_parameters())
        self.adam = make_adam(self.params, lr=config.lr)
        self.steps = 0

    def step(self, loss_fn: Callable[[], Tuple[torch.Tensor, float]]) -> Tuple[float, float]:
        try:
            with Tape(self.params) as tape:
                loss, nfe = loss_fn()
                tape.record(loss)
            value = float(loss.detach())
            if not math.isfinite(value):
                raise NonFiniteError(f"loss is {value}")
            grads = grad(tape)
        except NonFiniteError as e:
            logger.error(f"[{self.phase}] training diverged at step {self.steps}: {e}")
            raise DivergenceError(f"{self.phase} training diverged at step {self.steps}: {e}") from e
        adam_step(self.params, grads, self.adam)
        self.steps += 1
        return value, float(nfe)

    def fit(self, items: Sequence, batch_loss: BatchLoss,
            val_loss: Optional[Callable[[], float]] = None) -> TrainingLog:
        """Run up to ``config.epochs`` epochs, restoring the best parameters at the end.

        The monitored loss is ``val_loss()`` when given, otherwise the mean
        training loss of the epoch.
        """
        rng = np.random.default_rng(self.seed)
        stopper = EarlyStopping(self.config.patience)
        log = TrainingLog(phase=self.phase)

        for epoch in range(1, self.config.epochs + 1):
            start = metrics_collector.start_timer(f"{self.phase}_epoch")
            losses, nfes = [], []
            for batch in batches(items, self.config.batch_size, rng):
                loss, nfe = self.step(lambda: batch_loss(batch, rng))
                losses.append(loss)
                nfes.append(nfe)
            train_loss = float(np.mean(losses))
            val = None
            if val_loss is not None:
                with torch.no_grad():
                    val = float(val_loss())
            duration = metrics_collector.stop_timer(f"{self.phase}_epoch", start)
            entry = EpochLog(epoch=epoch, train_loss=train_loss, val_loss=val,
                             nfe=float(np.mean(nfes)), wall_clock=duration)
            log.epochs.append(entry)
            metrics_collector.track_epoch(self.phase, duration, train_loss, val)
            logger.info(
                f"[{self.phase}] epoch {epoch}: loss={train_loss:.6g}"
                + ("" if val is None else f" val_loss={val:.6g}")
                + f" nfe={entry.nfe:.1f} time={duration:.2f}s"
            )

            if stopper.update(epoch, train_loss if val is None else val, self.model):
                log.stopped_early = True
                logger.info(f"[{self.phase}] early stop after epoch {epoch}, best epoch {stopper.best_epoch}")
                break

        stopper.restore(self.model)
        log.best_epoch = stopper.best_epoch
        log.best_loss = None if stopper.best_epoch is None else stopper.best_loss
        return log
