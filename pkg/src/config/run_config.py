import json
import logging
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError, field_validator, model_validator

from src.config.settings import settings
from src.core.errors import ValidationError

logger = logging.getLogger(__name__)

SolverName = Literal["euler", "heun", "dopri5", "tsit5"]
DecoderName = Literal["fc20_1", "fc100_1", "fc400_4"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class SolverConfig(_Strict):
    solver: SolverName = "tsit5"
    rtol: float = Field(1e-3, gt=0)
    atol: float = Field(1e-6, gt=0)
    h0: float = Field(1e-3, gt=0)
    max_steps: int = Field(100_000, ge=1)

    def controller(self):
        from src.solvers.controller import StepController

        return StepController(rtol=self.rtol, atol=self.atol, h0=self.h0, max_steps=self.max_steps)

    def tableau(self):
        from src.solvers.tableaus import get_tableau

        return get_tableau(self.solver)


class SystemConfig(_Strict):
    """Where the data comes from: a synthetic system or a CSV series"""
    name: Optional[str] = "fhn"
    csv_path: Optional[str] = None
    n_trajectories: Optional[int] = Field(None, ge=1)
    timesteps: Optional[int] = Field(None, ge=2)
    dt: Optional[float] = Field(None, gt=0)
    train_ratio: float = Field(0.8, gt=0, lt=1)
    point_mask_fraction: float = Field(0.0, ge=0, le=1)
    lookback: int = Field(336, ge=1)
    horizon: int = Field(96, ge=1)

    @model_validator(mode="after")
    def _one_source(self):
        if self.csv_path is None and self.name is None:
            raise ValueError("either name or csv_path must be set")
        return self


class PredictorConfig(_Strict):
    kind: Literal["node", "dlinear", "rnn"] = "node"
    width: int = Field(100, ge=1)
    depth: int = Field(2, ge=1)
    kernel_size: int = Field(25, ge=1)
    rnn_hidden: int = Field(64, ge=1)
    solver: SolverConfig = Field(default_factory=SolverConfig)

    @field_validator("kernel_size")
    @classmethod
    def _odd_kernel(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError("kernel_size must be odd")
        return v


class TrainingConfig(_Strict):
    epochs: int = Field(100, ge=1)
    batch_size: int = Field(16, ge=1)
    lr: float = Field(1e-3, gt=0)
    patience: int = Field(20, ge=1)
    val_fraction: float = Field(0.1, ge=0, lt=1)
    train_horizon: int = Field(40, ge=2)


class CorrectorConfig(_Strict):
    kind: Literal["ncde", "mlp"] = "ncde"
    hidden: int = Field(11, ge=1)
    zeta_width: int = Field(50, ge=1)
    field_width: int = Field(400, ge=1)
    field_depth: int = Field(4, ge=1)
    field_final_tanh: bool = True
    decoder: DecoderName = "fc400_4"
    interpolation: Literal["hermite", "linear"] = "hermite"
    mlp_width: int = Field(100, ge=1)
    mlp_depth: int = Field(2, ge=1)
    solver: SolverConfig = Field(default_factory=SolverConfig)


class RegularizationConfig(_Strict):
    kappa: float = Field(1.0, gt=0, le=1)
    eta: int = Field(0, ge=0)
    observed_fraction: float = Field(1.0, gt=0, le=1)


class EvaluationConfig(_Strict):
    interpolation_cutoff: int = Field(50, ge=1)
    scan_step: int = Field(5, ge=1)
    threshold: float = 3.0
    stress_cutoff: Optional[int] = Field(None, ge=1)
    plots: bool = True


class AlternatingConfig(_Strict):
    rounds: int = Field(10, ge=1)
    predictor_steps: int = Field(1, ge=0)
    corrector_steps: int = Field(1, ge=0)


class RunConfig(_Strict):
    seed: int = settings.default_seed
    output_dir: str = settings.output_dir
    preset: Optional[str] = None
    system: SystemConfig = Field(default_factory=SystemConfig)
    predictor: PredictorConfig = Field(default_factory=PredictorConfig)
    predictor_training: TrainingConfig = Field(default_factory=TrainingConfig)
    corrector: CorrectorConfig = Field(default_factory=CorrectorConfig)
    corrector_training: TrainingConfig = Field(default_factory=lambda: TrainingConfig(batch_size=256, train_horizon=50))
    regularization: RegularizationConfig = Field(default_factory=RegularizationConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    alternating: AlternatingConfig = Field(default_factory=AlternatingConfig)

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        try:
            return cls.model_validate(data)
        except PydanticValidationError as e:
            raise ValidationError(_format_errors(e)) from e

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise ValidationError(f"config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ValidationError(f"config file {path} is not valid JSON: {e}")
        return cls.from_dict(data)

    def merged(self, overrides: dict) -> "RunConfig":
        """New config with nested ``{"section": {"key": value}}`` overrides applied"""
        return RunConfig.from_dict(_deep_merge(self.model_dump(), overrides))

    def echo(self) -> dict:
        return json.loads(self.model_dump_json())


def _deep_merge(base: dict, overrides: dict) -> dict:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _format_errors(error: PydanticValidationError) -> str:
    parts = []
    for item in error.errors():
        loc = ".".join(str(p) for p in item["loc"]) or "config"
        parts.append(f"{loc}: {item['msg']}")
    return "invalid config: " + "; ".join(parts)
