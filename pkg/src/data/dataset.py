from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterator, List, Optional, Sequence

import numpy as np

from src.core.errors import ValidationError


@dataclass(frozen=True)
class Trajectory:
    """One time series.

    ``mask`` marks observed entries (True) and is ``None`` when everything
    is observed. ``index`` records positions in the regular grid the
    trajectory was sampled from, when it is a subsample of one.
    """
    times: np.ndarray
    states: np.ndarray
    mask: Optional[np.ndarray] = None
    index: Optional[np.ndarray] = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        states = np.asarray(self.states, dtype=np.float64)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        if times.ndim != 1 or states.ndim != 2 or states.shape[0] != times.shape[0]:
            raise ValidationError(f"times {times.shape} and states {states.shape} are not (T,) and (T, D)")
        if times.shape[0] > 1 and not np.all(np.diff(times) > 0):
            raise ValidationError("trajectory times must be strictly increasing")
        if not np.all(np.isfinite(states)):
            raise ValidationError("trajectory states must be finite")
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.shape != states.shape:
                raise ValidationError(f"mask shape {mask.shape} does not match states {states.shape}")
            if not np.all(mask.any(axis=1)):
                raise ValidationError("every point needs at least one observed feature")
            object.__setattr__(self, "mask", mask)
        if self.index is not None:
            object.__setattr__(self, "index", np.asarray(self.index, dtype=np.int64))

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def observed(self) -> np.ndarray:
        """Observation mask with ``None`` expanded to all-true"""
        return np.ones_like(self.states, dtype=bool) if self.mask is None else self.mask

    def take(self, idx: Sequence[int]) -> "Trajectory":
        idx = np.asarray(idx, dtype=np.int64)
        base = self.index if self.index is not None else np.arange(len(self))
        return Trajectory(
            times=self.times[idx],
            states=self.states[idx],
            mask=None if self.mask is None else self.mask[idx],
            index=base[idx],
        )

    def head(self, n: int) -> "Trajectory":
        if n > len(self):
            raise ValidationError(f"requested {n} points from a trajectory of length {len(self)}")
        return replace(self, times=self.times[:n], states=self.states[:n],
                       mask=None if self.mask is None else self.mask[:n],
                       index=None if self.index is None else self.index[:n])


@dataclass
class Dataset:
    trajectories: List[Trajectory]
    split: str = "all"
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        dims = {t.dim for t in self.trajectories}
        if len(dims) > 1:
            raise ValidationError(f"trajectories disagree on dimension: {sorted(dims)}")

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self) -> Iterator[Trajectory]:
        return iter(self.trajectories)

    def __getitem__(self, i: int) -> Trajectory:
        return self.trajectories[i]

    @property
    def dim(self) -> int:
        if not self.trajectories:
            raise ValidationError("empty dataset has no dimension")
        return self.trajectories[0].dim

    @property
    def min_length(self) -> int:
        return min(len(t) for t in self.trajectories)

    def subset(self, idx: Sequence[int], split: Optional[str] = None) -> "Dataset":
        return Dataset([self.trajectories[i] for i in idx], split=split or self.split, provenance=dict(self.provenance))

    def stacked(self, length: Optional[int] = None) -> np.ndarray:
        """States as one ``(N, T, D)`` array; trajectories must share their first ``length`` times"""
        length = length or self.min_length
        return np.stack([t.states[:length] for t in self.trajectories])
