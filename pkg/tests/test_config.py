import json
import logging

import pytest

from src.config.logging_config import setup_logging
from src.config.presets import PRESETS, apply_preset, get_preset
from src.config.run_config import RunConfig, SolverConfig
from src.config.settings import Settings, settings
from src.core.errors import ValidationError
from src.solvers.tableaus import TSIT5


def test_defaults():
    config = RunConfig()
    assert config.corrector.hidden == 11
    assert config.corrector.decoder == "fc400_4"
    assert config.corrector.solver.solver == "tsit5"
    assert config.regularization.kappa == 1.0
    assert config.regularization.eta == 0
    assert config.corrector_training.train_horizon == 50
    assert config.evaluation.interpolation_cutoff == 50
    assert config.evaluation.threshold == 3.0


def test_solver_config_builds_controller_and_tableau():
    solver = SolverConfig(rtol=1e-4, atol=1e-7, h0=0.01)
    assert solver.tableau() is TSIT5
    controller = solver.controller()
    assert (controller.rtol, controller.atol, controller.h0) == (1e-4, 1e-7, 0.01)


@pytest.mark.parametrize("overrides,field", [
    ({"regularization": {"kappa": 1.5}}, "regularization.kappa"),
    ({"regularization": {"eta": -1}}, "regularization.eta"),
    ({"regularization": {"observed_fraction": 0.0}}, "regularization.observed_fraction"),
    ({"corrector": {"solver": {"solver": "rk4"}}}, "corrector.solver.solver"),
    ({"corrector": {"interpolation": "cubic"}}, "corrector.interpolation"),
    ({"corrector": {"decoder": "fc10_1"}}, "corrector.decoder"),
    ({"corrector": {"solver": {"rtol": 0}}}, "corrector.solver.rtol"),
    ({"predictor": {"kernel_size": 4}}, "predictor.kernel_size"),
    ({"unknown": 1}, "unknown"),
])
def test_invalid_values_name_the_field(overrides, field):
    with pytest.raises(ValidationError, match=field.replace(".", r"\.")):
        RunConfig().merged(overrides)


def test_system_needs_a_source():
    with pytest.raises(ValidationError):
        RunConfig.from_dict({"system": {"name": None}})


def test_json_round_trip(tmp_path):
    config = RunConfig().merged({"seed": 7, "regularization": {"kappa": 0.7, "eta": 10}})
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config.echo()))
    assert RunConfig.from_json(path) == config


def test_from_json_errors(tmp_path):
    with pytest.raises(ValidationError):
        RunConfig.from_json(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ValidationError):
        RunConfig.from_json(tmp_path / "bad.json")


def test_merge_keeps_untouched_sections():
    config = RunConfig().merged({"corrector": {"hidden": 5}})
    assert config.corrector.hidden == 5
    assert config.corrector.decoder == "fc400_4"


@pytest.mark.parametrize("name,kappa,eta,fraction", [
    ("fhn-100", 0.6, 0, 1.0),
    ("fhn-50", 0.4, 0, 0.5),
    ("lorenz-50", 0.8, 0, 0.5),
    ("glycolytic-80", 0.5, 0, 0.8),
    ("walker2d-20", 1.0, 10, 0.2),
    ("hammer-20", 1.0, 15, 0.2),
])
def test_presets(name, kappa, eta, fraction):
    preset = get_preset(name)
    assert (preset.kappa, preset.eta, preset.observed_fraction) == (kappa, eta, fraction)


def test_preset_table_coverage():
    assert len([n for n in PRESETS if n.startswith(("lorenz", "lotka", "fhn", "glycolytic"))]) == 16
    assert {"ili-24", "ili-60", "exchange-720", "linear4-mask60"} <= set(PRESETS)


def test_apply_preset_sets_horizons():
    config = apply_preset(RunConfig(), "exchange-336")
    assert config.preset == "exchange-336"
    assert config.predictor.kind == "dlinear"
    assert config.system.horizon == 336
    assert config.corrector_training.train_horizon == 150
    assert (config.regularization.kappa, config.regularization.eta) == (0.7, 10)


def test_apply_preset_masking():
    config = apply_preset(RunConfig(), "linear3-mask30")
    assert config.system.name == "linear3"
    assert config.system.point_mask_fraction == 0.3


def test_unknown_preset():
    with pytest.raises(ValidationError):
        get_preset("fhn-42")


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("PC_WORKERS", "3")
    monkeypatch.setenv("PC_LOG_LEVEL", "DEBUG")
    loaded = Settings()
    assert loaded.workers == 3
    assert loaded.is_parallel
    assert loaded.log_level == "DEBUG"


def test_setup_logging_without_file(monkeypatch):
    monkeypatch.setattr(settings, "log_file", "")
    setup_logging()
    assert not any(isinstance(h, logging.FileHandler) for h in logging.getLogger().handlers)
