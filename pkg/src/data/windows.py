"""Sliding (lookback, horizon) windows for direct multi-step forecasters."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src.core.errors import ValidationError
from src.data.dataset import Dataset, Trajectory

logger = logging.getLogger(__name__)


@dataclass
class Scaler:
    """Per-feature standardization; zero-variance features are only centred"""
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, values: np.ndarray) -> "Scaler":
        values = np.asarray(values, dtype=np.float64)
        mean = values.mean(axis=0)
        std = values.std(axis=0)
        return cls(mean=mean, std=np.where(std > 0, std, 1.0))

    @classmethod
    def identity(cls, dim: int) -> "Scaler":
        return cls(mean=np.zeros(dim), std=np.ones(dim))

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.std

    def inverse_transform(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.std + self.mean


@dataclass
class WindowSet:
    inputs: np.ndarray   # (N, lookback, D)
    targets: np.ndarray  # (N, horizon, D)
    scaler: Scaler
    columns: List[str]
    source: str = ""

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def lookback(self) -> int:
        return self.inputs.shape[1]

    @property
    def horizon(self) -> int:
        return self.targets.shape[1]

    @property
    def dim(self) -> int:
        return self.inputs.shape[2]

    def subset(self, idx) -> "WindowSet":
        return WindowSet(self.inputs[idx], self.targets[idx], self.scaler, self.columns, self.source)

    def split(self, train: float = 0.7, val: float = 0.1) -> Tuple["WindowSet", "WindowSet", "WindowSet"]:
        """Chronological train/validation/test partition of the windows"""
        n = len(self)
        n_train = int(n * train)
        n_val = int(n * val)
        return (self.subset(slice(0, n_train)), self.subset(slice(n_train, n_train + n_val)),
                self.subset(slice(n_train + n_val, n)))

    def as_dataset(self, split: str = "all") -> Dataset:
        """Each window as one trajectory over a local integer time index"""
        length = self.lookback + self.horizon
        times = np.arange(length, dtype=np.float64)
        trajectories = [
            Trajectory(times=times, states=np.concatenate([x, y], axis=0))
            for x, y in zip(self.inputs, self.targets)
        ]
        provenance = {"source": self.source, "lookback": self.lookback, "horizon": self.horizon,
                      "columns": self.columns}
        return Dataset(trajectories, split=split, provenance=provenance)


def sliding_windows(values: np.ndarray, lookback: int, horizon: int, stride: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    values = np.asarray(values, dtype=np.float64)
    n = (values.shape[0] - lookback - horizon) // stride + 1
    if lookback < 1 or horizon < 1 or n < 1:
        raise ValidationError(f"series of length {values.shape[0]} is too short for lookback {lookback} "
                              f"and horizon {horizon}")
    starts = np.arange(n) * stride
    inputs = np.stack([values[s:s + lookback] for s in starts])
    targets = np.stack([values[s + lookback:s + lookback + horizon] for s in starts])
    return inputs, targets


def load_csv_dataset(path: Union[str, Path], lookback: int, horizon: int, train_fraction: float = 0.7,
                     columns: Optional[List[str]] = None) -> WindowSet:
    """Windows over a CSV series with a header row and a leading time column.

    The time column is dropped in favour of the row index. Features are
    standardized with statistics of the first ``train_fraction`` of rows.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError:
        raise ValidationError(f"CSV not found: {path}")
    if frame.shape[1] < 2:
        raise ValidationError(f"{path}: expected a time column and at least one value column")
    values = frame.iloc[:, 1:]
    if columns is not None:
        values = values[columns]
    try:
        values = values.apply(pd.to_numeric, errors="raise")
    except (ValueError, TypeError) as e:
        raise ValidationError(f"{path}: non-numeric cell ({e})")
    if values.isna().any().any():
        raise ValidationError(f"{path}: empty cells")
    data = values.to_numpy(dtype=np.float64)

    n_train = int(len(data) * train_fraction)
    if n_train < 1:
        raise ValidationError(f"{path}: too few rows ({len(data)}) for a training split")
    scaler = Scaler.fit(data[:n_train])
    inputs, targets = sliding_windows(scaler.transform(data), lookback, horizon)
    logger.info(f"Loaded {path.name}: {data.shape[0]} rows, {data.shape[1]} variates, {inputs.shape[0]} windows")
    return WindowSet(inputs, targets, scaler, list(values.columns), source=str(path))


def windows_from_trajectories(dataset: Dataset, lookback: int, horizon: int, stride: int = 1) -> WindowSet:
    """Windows cut from every trajectory of a synthetic dataset, unscaled"""
    pieces = [sliding_windows(t.states, lookback, horizon, stride) for t in dataset]
    inputs = np.concatenate([p[0] for p in pieces])
    targets = np.concatenate([p[1] for p in pieces])
    columns = [f"x{d}" for d in range(dataset.dim)]
    return WindowSet(inputs, targets, Scaler.identity(dataset.dim), columns,
                     source=str(dataset.provenance.get("system", "")))
