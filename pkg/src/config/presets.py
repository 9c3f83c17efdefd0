"""Named regularization settings, one per benchmark (dataset, setting) pair.

A preset only fixes the corrector regularization (kappa, eta), the observed
fraction of time points and, where the setting implies them, the corrector
training horizon, the forecast window and the feature-masking level.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional

from src.config.run_config import RunConfig
from src.core.errors import ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Preset:
    kappa: float
    eta: int
    observed_fraction: float = 1.0
    corrector_train_horizon: Optional[int] = None
    forecast_horizon: Optional[int] = None
    lookback: Optional[int] = None
    point_mask_fraction: Optional[float] = None
    system: Optional[str] = None
    predictor: Optional[str] = None


_FRACTIONS = (20, 50, 80, 100)

# (kappa, eta) per observed fraction 20/50/80/100
_SYNTHETIC = {
    "lorenz": ((1.0, 0), (0.8, 0), (1.0, 0), (1.0, 0)),
    "lotka_volterra": ((1.0, 0), (0.5, 0), (1.0, 0), (0.6, 0)),
    "fhn": ((1.0, 0), (0.4, 0), (0.7, 0), (0.6, 0)),
    "glycolytic": ((1.0, 0), (1.0, 0), (0.5, 0), (0.5, 0)),
}

# simulated physics; the data comes in through CSV ingestion
_PHYSICS = {
    "hopper": ((1.0, 10), (1.0, 10), (0.2, 10), (0.2, 10)),
    "walker2d": ((1.0, 10), (0.6, 0), (0.6, 0), (0.7, 0)),
    "pen": ((1.0, 0), (0.6, 0), (0.6, 0), (0.8, 0)),
    "hammer": ((1.0, 15), (0.6, 0), (0.6, 0), (0.7, 0)),
}

# forecast horizon -> corrector training horizon
_LTSF_HORIZONS = {96: 50, 192: 100, 336: 150, 720: 300}
_LTSF = {
    "exchange": ((0.7, 10), (0.7, 10), (0.7, 10), (0.7, 10)),
    "ettm2": ((0.7, 10), (0.7, 10), (0.7, 10), (0.7, 10)),
    "etth2": ((0.7, 10), (0.7, 10), (0.7, 10), (0.7, 10)),
    "weather": ((1.0, 0), (0.7, 50), (1.0, 50), (1.0, 0)),
}
_ILI_HORIZONS = (24, 36, 48, 60)

_LINEAR_MASKS = (0, 30, 60)


def _build() -> Dict[str, Preset]:
    presets: Dict[str, Preset] = {}
    for system, rows in _SYNTHETIC.items():
        for pct, (kappa, eta) in zip(_FRACTIONS, rows):
            presets[f"{system}-{pct}"] = Preset(kappa, eta, observed_fraction=pct / 100, system=system,
                                                predictor="node")
    for system, rows in _PHYSICS.items():
        for pct, (kappa, eta) in zip(_FRACTIONS, rows):
            presets[f"{system}-{pct}"] = Preset(kappa, eta, observed_fraction=pct / 100)
    for dataset, rows in _LTSF.items():
        for (horizon, train_horizon), (kappa, eta) in zip(_LTSF_HORIZONS.items(), rows):
            presets[f"{dataset}-{horizon}"] = Preset(
                kappa, eta, corrector_train_horizon=train_horizon, forecast_horizon=horizon, lookback=336,
                predictor="dlinear",
            )
    for horizon in _ILI_HORIZONS:
        presets[f"ili-{horizon}"] = Preset(
            0.7, 10, corrector_train_horizon=horizon, forecast_horizon=horizon, lookback=104, predictor="dlinear",
        )
    for order in (2, 3, 4):
        for mask in _LINEAR_MASKS:
            presets[f"linear{order}-mask{mask}"] = Preset(
                1.0, 0, point_mask_fraction=mask / 100, system=f"linear{order}", predictor="node",
            )
    return presets


PRESETS: Dict[str, Preset] = _build()


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise ValidationError(f"unknown preset '{name}'")


def apply_preset(config: RunConfig, name: str) -> RunConfig:
    preset = get_preset(name)
    overrides: dict = {
        "preset": name.lower(),
        "regularization": {
            "kappa": preset.kappa,
            "eta": preset.eta,
            "observed_fraction": preset.observed_fraction,
        },
    }
    system: dict = {}
    if preset.system is not None:
        system["name"] = preset.system
    if preset.point_mask_fraction is not None:
        system["point_mask_fraction"] = preset.point_mask_fraction
    if preset.forecast_horizon is not None:
        system["horizon"] = preset.forecast_horizon
    if preset.lookback is not None:
        system["lookback"] = preset.lookback
    if system:
        overrides["system"] = system
    if preset.predictor is not None:
        overrides["predictor"] = {"kind": preset.predictor}
    if preset.corrector_train_horizon is not None:
        overrides["corrector_training"] = {"train_horizon": preset.corrector_train_horizon}
    logger.info(f"Applying preset {name}: kappa={preset.kappa}, eta={preset.eta}, "
                f"observed_fraction={preset.observed_fraction}")
    return config.merged(overrides)
