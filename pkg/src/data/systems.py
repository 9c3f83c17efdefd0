"""Closed-form vector fields of the synthetic benchmark systems.

Every field maps a tensor ``(..., D)`` to its time derivative of the same
shape, so one call integrates a whole batch of trajectories.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, Mapping, Tuple

import torch

from src.core.errors import ValidationError
from src.core.tensor import as_tensor


class SystemName(str, Enum):
    LORENZ = "lorenz"
    LOTKA_VOLTERRA = "lotka_volterra"
    FHN = "fhn"
    GLYCOLYTIC = "glycolytic"
    LINEAR2 = "linear2"
    LINEAR3 = "linear3"
    LINEAR4 = "linear4"


@dataclass(frozen=True)
class SystemSpec:
    name: SystemName
    dim: int
    params: Mapping[str, float]
    ic_box: Tuple[Tuple[float, float], ...]
    dt: float
    timesteps: int
    n_trajectories: int
    labels: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        if len(self.ic_box) != self.dim:
            raise ValidationError(f"{self.name.value}: initial-condition box has {len(self.ic_box)} ranges, expected {self.dim}")
        if any(lo > hi for lo, hi in self.ic_box):
            raise ValidationError(f"{self.name.value}: initial-condition range with lower bound above upper bound")
        if self.dt <= 0 or self.timesteps < 2 or self.n_trajectories < 1:
            raise ValidationError(f"{self.name.value}: dt, timesteps and n_trajectories must be positive")

    @property
    def horizon(self) -> float:
        return self.dt * (self.timesteps - 1)

    def with_overrides(self, **changes) -> "SystemSpec":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def _lorenz(x: torch.Tensor, p: Mapping[str, float]) -> torch.Tensor:
    u, v, w = x[..., 0], x[..., 1], x[..., 2]
    return torch.stack([
        p["sigma"] * (v - u),
        u * (p["rho"] - w) - v,
        u * v - p["beta"] * w,
    ], dim=-1)


def _lotka_volterra(x: torch.Tensor, p: Mapping[str, float]) -> torch.Tensor:
    prey, pred = x[..., 0], x[..., 1]
    return torch.stack([
        p["alpha"] * prey - p["beta"] * prey * pred,
        p["delta"] * prey * pred - p["gamma"] * pred,
    ], dim=-1)


def _fhn(x: torch.Tensor, p: Mapping[str, float]) -> torch.Tensor:
    v, w = x[..., 0], x[..., 1]
    return torch.stack([
        v - v ** 3 / 3.0 - w + p["I"],
        p["eps"] * (v + p["a"] - p["b"] * w),
    ], dim=-1)


def _glycolytic(x: torch.Tensor, p: Mapping[str, float]) -> torch.Tensor:
    s1, s2, s3, s4, s5, s6, s7 = (x[..., i] for i in range(7))
    uptake = p["k1"] * s1 * s6 / (1.0 + (s6 / p["K1"]) ** p["q"])
    v2 = p["k2"] * s2 * (p["N"] - s5)
    v3 = p["k3"] * s3 * (p["A"] - s6)
    v4 = p["k4"] * s4 * s5
    v6 = p["k6"] * s2 * s5
    exchange = p["kappa"] * (s4 - s7)
    return torch.stack([
        p["J0"] - uptake,
        2.0 * uptake - v2 - v6,
        v2 - v3,
        v3 - v4 - exchange,
        v2 - v4 - v6,
        -2.0 * uptake + 2.0 * v3 - p["k5"] * s6,
        p["psi"] * exchange - p["k"] * s7,
    ], dim=-1)


def _companion(x: torch.Tensor, p: Mapping[str, float]) -> torch.Tensor:
    """``x^(n) + c_{n-1} x^(n-1) + ... + c_0 x = 0`` in state-space form"""
    n = x.shape[-1]
    top = x[..., 1:]
    last = -sum(p[f"c{i}"] * x[..., i] for i in range(n))
    return torch.cat([top, last.unsqueeze(-1)], dim=-1)


_FIELDS: Dict[SystemName, Callable[[torch.Tensor, Mapping[str, float]], torch.Tensor]] = {
    SystemName.LORENZ: _lorenz,
    SystemName.LOTKA_VOLTERRA: _lotka_volterra,
    SystemName.FHN: _fhn,
    SystemName.GLYCOLYTIC: _glycolytic,
    SystemName.LINEAR2: _companion,
    SystemName.LINEAR3: _companion,
    SystemName.LINEAR4: _companion,
}


SYSTEMS: Dict[SystemName, SystemSpec] = {
    SystemName.LOTKA_VOLTERRA: SystemSpec(
        name=SystemName.LOTKA_VOLTERRA, dim=2,
        params={"alpha": 1.1, "beta": 0.4, "gamma": 0.4, "delta": 0.1},
        ic_box=((5.0, 20.0), (5.0, 10.0)),
        dt=0.1, timesteps=300, n_trajectories=500, labels=("x", "y"),
    ),
    SystemName.LORENZ: SystemSpec(
        name=SystemName.LORENZ, dim=3,
        params={"sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0},
        ic_box=((-20.0, 20.0), (-20.0, 20.0), (0.0, 50.0)),
        dt=0.01, timesteps=300, n_trajectories=1000, labels=("x", "y", "z"),
    ),
    SystemName.FHN: SystemSpec(
        name=SystemName.FHN, dim=2,
        params={"a": 0.7, "b": 0.8, "eps": 0.08, "I": 0.5},
        ic_box=((-1.5, 1.5), (-1.5, 1.5)),
        dt=0.5, timesteps=400, n_trajectories=350, labels=("v", "w"),
    ),
    SystemName.GLYCOLYTIC: SystemSpec(
        name=SystemName.GLYCOLYTIC, dim=7,
        params={
            "J0": 2.5, "k1": 100.0, "k2": 6.0, "k3": 16.0, "k4": 100.0, "k5": 1.28, "k6": 12.0,
            "k": 1.8, "kappa": 13.0, "q": 4.0, "K1": 0.52, "psi": 0.1, "N": 1.0, "A": 4.0,
        },
        ic_box=((0.15, 1.60), (0.19, 2.16), (0.04, 0.20), (0.10, 0.35), (0.08, 0.30), (0.14, 2.67), (0.05, 0.10)),
        dt=0.01, timesteps=400, n_trajectories=750, labels=tuple(f"S{i}" for i in range(1, 8)),
    ),
    # Linear systems have no grid of their own; they share the Lotka-Volterra one.
    SystemName.LINEAR2: SystemSpec(
        name=SystemName.LINEAR2, dim=2,
        params={"c0": 1.0, "c1": 0.3},
        ic_box=((-1.0, 1.0),) * 2,
        dt=0.1, timesteps=300, n_trajectories=500, labels=("x", "dx"),
    ),
    SystemName.LINEAR3: SystemSpec(
        name=SystemName.LINEAR3, dim=3,
        params={"c0": 1.0, "c1": 0.3, "c2": 0.4},
        ic_box=((-1.0, 1.0),) * 3,
        dt=0.1, timesteps=300, n_trajectories=500, labels=("x", "dx", "d2x"),
    ),
    SystemName.LINEAR4: SystemSpec(
        name=SystemName.LINEAR4, dim=4,
        params={"c0": 1.0, "c1": 0.3, "c2": 0.5, "c3": 0.3},
        ic_box=((-1.0, 1.0),) * 4,
        dt=0.1, timesteps=300, n_trajectories=500, labels=("x", "dx", "d2x", "d3x"),
    ),
}


def get_system(name: str, **overrides) -> SystemSpec:
    try:
        spec = SYSTEMS[SystemName(name)]
    except ValueError:
        raise ValidationError(f"unknown system '{name}', expected one of {[s.value for s in SystemName]}")
    return spec.with_overrides(**overrides) if overrides else spec


def vector_field(spec: SystemSpec, state: torch.Tensor) -> torch.Tensor:
    state = as_tensor(state)
    if state.shape[-1:] != (spec.dim,):
        raise ValidationError(f"{spec.name.value} expects state dimension {spec.dim}, got {tuple(state.shape)}")
    return _FIELDS[spec.name](state, spec.params)
