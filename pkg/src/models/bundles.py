import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from src.core.errors import ValidationError
from src.core.parallel import parallel_map
from src.data.dataset import Dataset, Trajectory
from src.models.predictor import Predictor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForecastBundle:
    """A forecast paired with its ground truth; ``errors = truth - forecast``"""
    times: np.ndarray
    forecast: np.ndarray
    truth: np.ndarray
    errors: np.ndarray
    mask: Optional[np.ndarray] = None

    @classmethod
    def from_forecast(cls, times, forecast, truth, mask=None) -> "ForecastBundle":
        forecast = np.asarray(forecast, dtype=np.float64)
        truth = np.asarray(truth, dtype=np.float64)
        if forecast.shape != truth.shape:
            raise ValidationError(f"forecast {forecast.shape} and truth {truth.shape} differ in shape")
        times = np.asarray(times, dtype=np.float64)
        if times.shape[0] != forecast.shape[0]:
            raise ValidationError("forecast and truth must share their times")
        return cls(times=times, forecast=forecast, truth=truth, errors=truth - forecast,
                   mask=None if mask is None else np.asarray(mask, dtype=bool))

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def dim(self) -> int:
        return self.forecast.shape[1]

    def head(self, n: int) -> "ForecastBundle":
        if n > len(self):
            raise ValidationError(f"requested {n} points from a bundle of length {len(self)}")
        return ForecastBundle(self.times[:n], self.forecast[:n], self.truth[:n], self.errors[:n],
                              None if self.mask is None else self.mask[:n])

    @property
    def observed(self) -> np.ndarray:
        return np.ones_like(self.errors, dtype=bool) if self.mask is None else self.mask


def extract_forecast_bundles(predictor: Predictor, dataset: Dataset, horizon: int,
                             workers: Optional[int] = None) -> List[ForecastBundle]:
    """Forecast every trajectory from its start (after any lookback context)"""
    offset = predictor.forecast_offset
    if horizon < 1:
        raise ValidationError(f"horizon must be positive, got {horizon}")
    too_short = [i for i, t in enumerate(dataset) if offset + horizon > len(t)]
    if too_short:
        raise ValidationError(f"horizon {horizon} (offset {offset}) exceeds the length of "
                              f"{len(too_short)} trajectories")

    def one(trajectory: Trajectory) -> ForecastBundle:
        window = slice(offset, offset + horizon)
        forecast = predictor.forecast_trajectory(trajectory, horizon)
        return ForecastBundle.from_forecast(
            trajectory.times[window], forecast, trajectory.states[window],
            None if trajectory.mask is None else trajectory.mask[window],
        )

    bundles = parallel_map(one, list(dataset), workers)
    logger.info(f"Extracted {len(bundles)} {predictor.kind} forecast bundles over {horizon} steps")
    return bundles


def stack_bundles(bundles: Sequence[ForecastBundle], field: str, length: Optional[int] = None) -> np.ndarray:
    """``(N, T, D)`` array of one bundle field, truncated to ``length``"""
    if not bundles:
        raise ValidationError("no bundles")
    length = length or min(len(b) for b in bundles)
    return np.stack([getattr(b, field)[:length] for b in bundles])
