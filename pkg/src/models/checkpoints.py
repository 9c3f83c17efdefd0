"""JSON checkpoints for predictors and correctors.

Every network is stored in the shared ``MlpCheckpoint`` layout; the
enclosing document carries a ``kind`` tag plus the hyperparameters needed
to rebuild the model around those networks.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import BaseModel, Field
from pydantic import ValidationError as PydanticValidationError
from torch import nn

from src.config.run_config import CorrectorConfig, PredictorConfig
from src.core.errors import ValidationError
from src.core.tensor import MlpCheckpoint, mlp_from_checkpoint, mlp_to_checkpoint
from src.models.corrector import CorrectorModel
from src.models.dlinear import DLinearModel
from src.models.mlp_corrector import MlpCorrectorModel
from src.models.node import NodeModel
from src.models.rnn import RnnModel
from src.solvers.controller import StepController

logger = logging.getLogger(__name__)

PREDICTOR_KINDS = ("node", "dlinear", "rnn")
CORRECTOR_KINDS = ("ncde", "mlp")


class ModelCheckpoint(BaseModel):
    kind: str
    hyperparameters: Dict[str, Any] = Field(default_factory=dict)
    networks: Dict[str, MlpCheckpoint]


def build_predictor(kind: str, dim: int, config: PredictorConfig, lookback: int = 0, horizon: int = 0,
                    seed: Optional[int] = None) -> nn.Module:
    if kind == "node":
        return NodeModel(dim, config.width, config.depth, config.solver.solver,
                         config.solver.controller(), seed=seed)
    if kind == "dlinear":
        return DLinearModel(dim, lookback, horizon, config.kernel_size, seed=seed)
    if kind == "rnn":
        return RnnModel(dim, config.rnn_hidden, seed=seed)
    raise ValidationError(f"unknown predictor kind '{kind}', expected one of {PREDICTOR_KINDS}")


def build_corrector(dim: int, config: CorrectorConfig, seed: Optional[int] = None) -> nn.Module:
    if config.kind == "mlp":
        return MlpCorrectorModel(dim, config.mlp_width, config.mlp_depth, seed=seed)
    return CorrectorModel(
        dim,
        hidden=config.hidden,
        zeta_width=config.zeta_width,
        field_width=config.field_width,
        field_depth=config.field_depth,
        field_final_tanh=config.field_final_tanh,
        decoder=config.decoder,
        interpolation=config.interpolation,
        solver=config.solver.solver,
        controller=config.solver.controller(),
        seed=seed,
    )


def _controller(hyper: Dict[str, Any]) -> StepController:
    if not isinstance(hyper.get("controller"), dict):
        raise ValidationError("checkpoint is missing its step-size controller settings")
    return StepController.from_dict(hyper.pop("controller"))


def _rebuild(kind: str, hyper: Dict[str, Any]) -> nn.Module:
    hyper = dict(hyper)
    if kind == "node":
        return NodeModel(controller=_controller(hyper), **hyper)
    if kind == "dlinear":
        return DLinearModel(**hyper)
    if kind == "rnn":
        return RnnModel(**hyper)
    if kind == "ncde":
        return CorrectorModel(controller=_controller(hyper), **hyper)
    if kind == "mlp":
        return MlpCorrectorModel(**hyper)
    raise ValidationError(f"unknown model kind '{kind}'")


def to_checkpoint(model: nn.Module) -> ModelCheckpoint:
    return ModelCheckpoint(
        kind=model.kind,
        hyperparameters=model.hyperparameters(),
        networks={name: mlp_to_checkpoint(net) for name, net in model.networks().items()},
    )


def from_checkpoint(checkpoint: Union[ModelCheckpoint, dict]) -> nn.Module:
    try:
        ckpt = ModelCheckpoint.model_validate(checkpoint)
    except PydanticValidationError as e:
        raise ValidationError(f"malformed checkpoint: {e}") from e
    model = _rebuild(ckpt.kind, ckpt.hyperparameters)
    expected = set(model.networks())
    if set(ckpt.networks) != expected:
        raise ValidationError(f"{ckpt.kind} checkpoint holds networks {sorted(ckpt.networks)}, expected {sorted(expected)}")
    for name, net in model.networks().items():
        loaded = mlp_from_checkpoint(ckpt.networks[name])
        if loaded.sizes != net.sizes:
            raise ValidationError(f"network '{name}' has sizes {loaded.sizes}, expected {net.sizes}")
        net.load_state_dict(loaded.state_dict())
    return model


def _save(model: nn.Module, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_checkpoint(model).model_dump(mode="json"), sort_keys=True))
    logger.info(f"Saved {model.kind} checkpoint to {path}")
    return path


def _load(path: Union[str, Path], kinds) -> nn.Module:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"checkpoint {path} does not exist")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ValidationError(f"checkpoint {path} is not valid JSON: {e}") from e
    if data.get("kind") not in kinds:
        raise ValidationError(f"checkpoint {path} has kind {data.get('kind')!r}, expected one of {kinds}")
    model = from_checkpoint(data)
    logger.info(f"Loaded {model.kind} checkpoint from {path}")
    return model


def save_predictor(model: nn.Module, path: Union[str, Path]) -> Path:
    return _save(model, path)


def load_predictor(path: Union[str, Path]) -> nn.Module:
    return _load(path, PREDICTOR_KINDS)


def save_corrector(model: nn.Module, path: Union[str, Path]) -> Path:
    return _save(model, path)


def load_corrector(path: Union[str, Path]) -> nn.Module:
    return _load(path, CORRECTOR_KINDS)
