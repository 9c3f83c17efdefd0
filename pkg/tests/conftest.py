import numpy as np
import pandas as pd
import pytest

from src.config.run_config import RunConfig
from src.data.generation import generate_dataset
from src.data.systems import get_system


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def fhn_small():
    """Six short FitzHugh-Nagumo trajectories"""
    return generate_dataset(get_system("fhn", n_trajectories=6, timesteps=40), seed=0)


@pytest.fixture
def csv_series(tmp_path):
    t = np.arange(240, dtype=np.float64)
    frame = pd.DataFrame({
        "date": t,
        "a": np.sin(0.2 * t) + 0.01 * t,
        "b": np.cos(0.13 * t),
    })
    path = tmp_path / "series.csv"
    frame.to_csv(path, index=False)
    return path


@pytest.fixture
def small_config(tmp_path):
    """Desk-sized run: a handful of short FHN trajectories, small networks, a few epochs"""
    return RunConfig.from_dict({
        "seed": 0,
        "output_dir": str(tmp_path / "run"),
        "system": {"name": "fhn", "n_trajectories": 10, "timesteps": 30},
        "predictor": {"kind": "node", "width": 16, "depth": 1},
        "predictor_training": {"epochs": 2, "batch_size": 4, "patience": 5, "train_horizon": 10},
        "corrector": {"hidden": 3, "zeta_width": 8, "field_width": 16, "field_depth": 1, "decoder": "fc20_1",
                      "solver": {"solver": "heun", "rtol": 1e-2, "atol": 1e-4}},
        "corrector_training": {"epochs": 2, "batch_size": 4, "patience": 5, "train_horizon": 12},
        "evaluation": {"interpolation_cutoff": 10, "scan_step": 5},
        "alternating": {"rounds": 2},
    })
