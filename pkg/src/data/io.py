import json
import logging
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from src.core.errors import ValidationError
from src.data.dataset import Dataset, Trajectory

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
MANIFEST = "manifest.json"


def trajectory_frame(trajectory: Trajectory) -> pd.DataFrame:
    columns = {"t": trajectory.times}
    for d in range(trajectory.dim):
        columns[f"x{d}"] = trajectory.states[:, d]
    if trajectory.mask is not None:
        for d in range(trajectory.dim):
            columns[f"m{d}"] = trajectory.mask[:, d].astype(np.int64)
    return pd.DataFrame(columns)


def write_dataset(dataset: Dataset, directory: Union[str, Path], prefix: str = "traj") -> Path:
    """One CSV per trajectory plus a JSON manifest; output is byte-deterministic"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for i, trajectory in enumerate(dataset):
        name = f"{prefix}_{i:05d}.csv"
        trajectory_frame(trajectory).to_csv(directory / name, index=False, float_format=FLOAT_FORMAT,
                                            lineterminator="\n")
        files.append(name)

    manifest = {
        "files": files,
        "dim": dataset.dim if len(dataset) else 0,
        "dt": dataset.provenance.get("dt"),
        "split": dataset.split,
        "provenance": dataset.provenance,
    }
    (directory / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    logger.info(f"Wrote {len(files)} trajectories to {directory}")
    return directory


def read_trajectory(path: Union[str, Path], dim: int) -> Trajectory:
    frame = pd.read_csv(path)
    expected = ["t"] + [f"x{d}" for d in range(dim)]
    missing = [c for c in expected if c not in frame.columns]
    if missing:
        raise ValidationError(f"{path}: missing columns {missing}")
    mask_cols = [f"m{d}" for d in range(dim)]
    mask = frame[mask_cols].to_numpy(dtype=bool) if all(c in frame.columns for c in mask_cols) else None
    return Trajectory(
        times=frame["t"].to_numpy(dtype=np.float64),
        states=frame[expected[1:]].to_numpy(dtype=np.float64),
        mask=mask,
    )


def read_dataset(directory: Union[str, Path]) -> Dataset:
    directory = Path(directory)
    manifest_path = directory / MANIFEST
    if not manifest_path.exists():
        raise ValidationError(f"no {MANIFEST} in {directory}")
    manifest = json.loads(manifest_path.read_text())
    trajectories = [read_trajectory(directory / name, manifest["dim"]) for name in manifest["files"]]
    logger.info(f"Read {len(trajectories)} trajectories from {directory}")
    return Dataset(trajectories, split=manifest.get("split", "all"), provenance=manifest.get("provenance", {}))


def read_long_csv(path: Union[str, Path], split: str = "all") -> Dataset:
    """One long CSV with a ``traj_id`` column, as exported by simulators"""
    frame = pd.read_csv(path)
    if "traj_id" not in frame.columns or "t" not in frame.columns:
        raise ValidationError(f"{path}: expected 't' and 'traj_id' columns")
    state_cols = sorted((c for c in frame.columns if c.startswith("x") and c[1:].isdigit()), key=lambda c: int(c[1:]))
    mask_cols = [f"m{c[1:]}" for c in state_cols]
    has_mask = all(c in frame.columns for c in mask_cols)
    trajectories = []
    for _, group in frame.groupby("traj_id", sort=True):
        group = group.sort_values("t")
        trajectories.append(Trajectory(
            times=group["t"].to_numpy(dtype=np.float64),
            states=group[state_cols].to_numpy(dtype=np.float64),
            mask=group[mask_cols].to_numpy(dtype=bool) if has_mask else None,
        ))
    return Dataset(trajectories, split=split, provenance={"source": str(path)})
