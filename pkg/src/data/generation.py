import logging
from typing import Optional, Tuple

import numpy as np
import torch

from src.core.errors import NumericalError, ValidationError
from src.core.parallel import parallel_map
from src.data.dataset import Dataset, Trajectory
from src.data.systems import SystemName, SystemSpec, vector_field
from src.solvers.controller import StepController
from src.solvers.integrate import integrate_adaptive
from src.solvers.tableaus import DOPRI5

logger = logging.getLogger(__name__)

# Ground truth must stay well below model-time solver error.
DATAGEN_RTOL = 1e-6
DATAGEN_ATOL = 1e-9


def sample_initial_conditions(spec: SystemSpec, n: int, seed: int) -> np.ndarray:
    """Uniform samples from the initial-condition box, shape ``(n, D)``"""
    if n < 1:
        raise ValidationError(f"need at least one initial condition, got n={n}")
    box = np.asarray(spec.ic_box, dtype=np.float64)
    rng = np.random.default_rng(seed)
    return rng.uniform(box[:, 0], box[:, 1], size=(n, spec.dim))


def integrate_system(spec: SystemSpec, x0: np.ndarray, times: np.ndarray,
                     controller: Optional[StepController] = None) -> np.ndarray:
    controller = controller or StepController(rtol=DATAGEN_RTOL, atol=DATAGEN_ATOL, h0=min(1e-3, spec.dt))

    def f(t, y):
        return vector_field(spec, y)

    with torch.no_grad():
        result = integrate_adaptive(DOPRI5, controller, f, torch.as_tensor(x0, dtype=torch.float64), times)
    return result.states.numpy()


def generate_dataset(spec: SystemSpec, seed: int, workers: Optional[int] = None) -> Dataset:
    """Integrate ``spec.n_trajectories`` trajectories onto the regular grid ``k * dt``"""
    times = np.arange(spec.timesteps, dtype=np.float64) * spec.dt
    initial = sample_initial_conditions(spec, spec.n_trajectories, seed)
    logger.info(f"Generating {spec.n_trajectories} {spec.name.value} trajectories "
                f"({spec.timesteps} steps, dt={spec.dt})")

    def one(i: int) -> Trajectory:
        try:
            states = integrate_system(spec, initial[i], times)
        except NumericalError as e:
            logger.error(f"Integration of trajectory {i} failed from initial condition {initial[i].tolist()}: {e}")
            raise type(e)(f"trajectory {i} from initial condition {initial[i].tolist()}: {e}") from e
        return Trajectory(times=times, states=states)

    trajectories = parallel_map(one, range(spec.n_trajectories), workers)
    provenance = {
        "system": spec.name.value,
        "dim": spec.dim,
        "dt": spec.dt,
        "timesteps": spec.timesteps,
        "n_trajectories": spec.n_trajectories,
        "seed": seed,
    }
    return Dataset(trajectories, split="all", provenance=provenance)


def split_train_test(dataset: Dataset, ratio: float = 0.8, seed: int = 0) -> Tuple[Dataset, Dataset]:
    if not 0 < ratio < 1:
        raise ValidationError(f"split ratio must lie in (0, 1), got {ratio}")
    n = len(dataset)
    if n < 2:
        raise ValidationError(f"cannot split a dataset of {n} trajectories")
    order = np.random.default_rng(seed).permutation(n)
    n_train = min(max(int(round(ratio * n)), 1), n - 1)
    train = dataset.subset(sorted(order[:n_train].tolist()), split="train")
    test = dataset.subset(sorted(order[n_train:].tolist()), split="test")
    return train, test


def check_positivity(dataset: Dataset) -> dict:
    """Report how many trajectories leave the positive orthant; never raises"""
    negative = [i for i, t in enumerate(dataset) if np.any(t.states <= 0)]
    minimum = float(min(t.states.min() for t in dataset)) if len(dataset) else float("nan")
    report = {
        "n_trajectories": len(dataset),
        "n_non_positive": len(negative),
        "min_value": minimum,
        "non_positive_indices": negative,
    }
    if negative:
        system = dataset.provenance.get("system", "dataset")
        logger.warning(f"{system}: {len(negative)} of {len(dataset)} trajectories reach non-positive values "
                       f"(min {minimum:.3g})")
    return report


def is_positive_system(spec: SystemSpec) -> bool:
    return spec.name is SystemName.GLYCOLYTIC
