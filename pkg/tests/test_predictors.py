import numpy as np
import pytest
import torch

from src.config.run_config import PredictorConfig, TrainingConfig
from src.core.errors import ValidationError
from src.core.tensor import Tape, grad, mse_loss
from src.data.dataset import Trajectory
from src.data.sampling import subsample_indices
from src.data.windows import windows_from_trajectories
from src.models.bundles import extract_forecast_bundles, stack_bundles
from src.models.checkpoints import (
    build_predictor,
    load_corrector,
    load_predictor,
    save_predictor,
)
from src.models.dlinear import DLinearModel, dlinear_forecast, moving_average
from src.models.node import NodeModel, node_forecast
from src.models.predictor import Predictor, hold_last_sampled, observation_weights, shared_times
from src.models.rnn import RnnModel, rnn_forecast, teacher_forced
from src.solvers.integrate import integrate_fixed
from src.solvers.tableaus import get_tableau
from src.training.loop import EarlyStopping, TrainingLog, validation_split
from src.training.predictor_training import train_dlinear, train_node, train_predictor, train_rnn

TINY = TrainingConfig(epochs=3, batch_size=2, patience=10, val_fraction=0.2, train_horizon=10)


@pytest.mark.parametrize("model", [
    NodeModel(2, width=8, depth=1, seed=0),
    DLinearModel(2, lookback=8, horizon=4, kernel_size=3, seed=0),
    RnnModel(2, hidden=4, seed=0),
], ids=["node", "dlinear", "rnn"])
def test_models_satisfy_predictor_protocol(model):
    assert isinstance(model, Predictor)


def test_node_forecast_starts_at_initial_state(fhn_small):
    model = NodeModel(2, width=8, depth=1, seed=0)
    forecast = model.forecast_trajectory(fhn_small[0], 12)
    assert forecast.shape == (12, 2)
    assert np.array_equal(forecast[0], fhn_small[0].states[0])
    with pytest.raises(ValidationError):
        model.forecast_trajectory(fhn_small[0], 41)


def test_node_batched_forecast_shape(fhn_small):
    model = NodeModel(2, width=8, depth=1, seed=0)
    x0 = np.stack([t.states[0] for t in fhn_small])
    assert node_forecast(model, x0, fhn_small[0].times[:5]).shape == (6, 5, 2)


def test_node_loss_gradient_matches_finite_differences(fhn_small):
    model = NodeModel(2, width=6, depth=1, seed=1)
    times = fhn_small[0].times[:6]
    truth = torch.tensor(np.stack([t.states[:6] for t in fhn_small[:3]]))
    tsit5 = get_tableau("tsit5")

    def loss():
        result = integrate_fixed(tsit5, model.vector_field, truth[:, 0, :], times, h=0.25)
        return mse_loss(result.states.movedim(0, -2), truth)

    params = dict(model.named_parameters())
    with Tape(params) as tape:
        tape.record(loss())
    grads = grad(tape)

    eps = 1e-6
    rng = np.random.default_rng(0)
    for name, p in params.items():
        flat = p.detach().view(-1)
        for idx in rng.choice(flat.numel(), size=min(3, flat.numel()), replace=False):
            with torch.no_grad():
                orig = float(flat[idx])
                flat[idx] = orig + eps
                up = float(loss())
                flat[idx] = orig - eps
                down = float(loss())
                flat[idx] = orig
            fd = (up - down) / (2 * eps)
            analytic = float(grads[name].view(-1)[idx])
            assert abs(fd - analytic) <= 1e-3 * max(abs(analytic), 1e-4), name


def test_moving_average_keeps_constants():
    x = torch.full((3, 10, 2), 1.5, dtype=torch.float64)
    assert torch.allclose(moving_average(x, 5), x)
    with pytest.raises(ValidationError):
        moving_average(x, 4)


def test_dlinear_initial_forecast_of_constant_window():
    model = DLinearModel(2, lookback=8, horizon=4, kernel_size=3, seed=0)
    window = np.full((8, 2), 2.0)
    assert torch.allclose(dlinear_forecast(model, window), torch.full((4, 2), 2.0, dtype=torch.float64))
    assert model.forecast_offset == 8


def test_dlinear_rejects_bad_windows(fhn_small):
    model = DLinearModel(2, lookback=8, horizon=4, kernel_size=3, seed=0)
    with pytest.raises(ValidationError):
        dlinear_forecast(model, np.zeros((7, 2)))
    with pytest.raises(ValidationError):
        model.forecast_trajectory(fhn_small[0], 5)


def test_rnn_rollout_and_teacher_forcing(fhn_small):
    model = RnnModel(2, hidden=4, seed=0)
    rollout = rnn_forecast(model, fhn_small[0].states[0], 7)
    assert rollout.shape == (7, 2)
    assert np.array_equal(rollout[0].detach().numpy(), fhn_small[0].states[0])
    assert teacher_forced(model, torch.tensor(fhn_small[0].states[:5])).shape == (5, 2)


def test_moving_average_pads_with_edge_values():
    x = torch.tensor([1.0, 2.0, 3.0, 4.0, 10.0], dtype=torch.float64).reshape(5, 1)
    expected = torch.tensor([4.0 / 3.0, 2.0, 3.0, 17.0 / 3.0, 8.0], dtype=torch.float64).reshape(5, 1)
    assert torch.allclose(moving_average(x, 3), expected, rtol=1e-12, atol=0)
    assert torch.equal(moving_average(x, 1), x)


def test_dlinear_initial_forecast_is_window_mean():
    model = DLinearModel(1, lookback=5, horizon=3, kernel_size=3, seed=0)
    window = np.array([[1.0], [2.0], [3.0], [4.0], [10.0]])
    assert torch.allclose(dlinear_forecast(model, window), torch.full((3, 1), 4.0, dtype=torch.float64))


def test_dlinear_without_smoothing_repeats_last_value():
    model = DLinearModel(2, lookback=4, horizon=3, kernel_size=1, seed=0)
    with torch.no_grad():
        model.trend_map.layers[0].weight.zero_()
        model.trend_map.layers[0].weight[:, -1] = 1.0
    window = np.array([[1.0, 5.0], [2.0, 6.0], [3.0, 7.0], [4.0, 8.0]])
    expected = torch.tensor([[4.0, 8.0]] * 3, dtype=torch.float64)
    assert torch.equal(dlinear_forecast(model, window).detach(), expected)


def test_rnn_with_zero_weights_emits_readout_bias():
    model = RnnModel(2, hidden=4, seed=0)
    with torch.no_grad():
        for p in model.parameters():
            p.zero_()
        model.readout.layers[-1].bias.copy_(torch.tensor([0.5, -1.0]))
    bias = torch.tensor([0.5, -1.0], dtype=torch.float64)
    x0 = np.array([3.0, 4.0])
    rollout = rnn_forecast(model, x0, 4).detach()
    assert torch.equal(rollout[0], torch.tensor(x0))
    assert torch.equal(rollout[1:], bias.expand(3, 2))
    outputs = teacher_forced(model, torch.randn(6, 2, dtype=torch.float64)).detach()
    assert torch.equal(outputs, bias.expand(6, 2))


def test_hold_last_sampled_repeats_previous_point():
    states = torch.arange(10.0, dtype=torch.float64).reshape(1, 5, 2)
    weights = torch.tensor([[[1.0, 1.0], [0.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]]], dtype=torch.float64)
    held = hold_last_sampled(states, weights)
    assert torch.equal(held[0, :, 0], torch.tensor([0.0, 0.0, 4.0, 4.0, 4.0], dtype=torch.float64))


def test_rnn_loss_ignores_unsampled_states(rng):
    trajectory = Trajectory(times=np.arange(12.0), states=rng.normal(size=(12, 2)))
    kept = subsample_indices(12, 0.5, np.random.default_rng(3))
    perturbed_states = trajectory.states.copy()
    dropped = np.setdiff1d(np.arange(12), kept)
    perturbed_states[dropped] += 100.0
    perturbed = Trajectory(times=trajectory.times, states=perturbed_states)

    model = RnnModel(2, hidden=4, seed=0)
    loss, _ = model.training_loss([trajectory], 12, 0.5, np.random.default_rng(3))
    loss_perturbed, _ = model.training_loss([perturbed], 12, 0.5, np.random.default_rng(3))
    assert len(dropped) > 0
    assert float(loss_perturbed) == pytest.approx(float(loss), rel=1e-12)


def test_shared_times_and_weights(fhn_small, rng):
    batch = list(fhn_small)[:3]
    assert np.array_equal(shared_times(batch, 10), fhn_small[0].times[:10])
    weights = observation_weights(batch, 10, 0.5, rng)
    assert weights.shape == (3, 10, 2)
    assert torch.all(weights.sum(dim=(1, 2)) == 10)
    shifted = Trajectory(times=fhn_small[0].times + 1.0, states=fhn_small[0].states)
    with pytest.raises(ValidationError):
        shared_times([fhn_small[0], shifted], 10)


@pytest.mark.parametrize("trainer", [train_node, train_rnn], ids=["node", "rnn"])
def test_training_logs_every_epoch(fhn_small, trainer):
    _, log = trainer(fhn_small, TINY, PredictorConfig(width=8, depth=1, rnn_hidden=4), seed=0)
    assert [e.epoch for e in log.epochs] == [1, 2, 3]
    assert all(np.isfinite(e.train_loss) and e.val_loss is not None for e in log.epochs)
    assert all(e.wall_clock >= 0 for e in log.epochs)
    assert log.best_epoch in (1, 2, 3)


def test_training_is_reproducible(fhn_small):
    config = PredictorConfig(width=8, depth=1)
    _, first = train_node(fhn_small, TINY, config, seed=3)
    _, second = train_node(fhn_small, TINY, config, seed=3)
    assert abs(first.final_loss - second.final_loss) <= 1e-12


def test_node_training_under_irregular_sampling(fhn_small):
    _, log = train_node(fhn_small, TINY, PredictorConfig(width=8, depth=1), observed_fraction=0.5, seed=0)
    assert np.isfinite(log.final_loss)


def test_training_refuses_long_horizon(fhn_small):
    model = build_predictor("node", 2, PredictorConfig(width=8, depth=1), seed=0)
    with pytest.raises(ValidationError):
        train_predictor(model, fhn_small, TINY, horizon=41)


def test_dlinear_trains_on_windows(fhn_small):
    windows = windows_from_trajectories(fhn_small, lookback=12, horizon=6)
    model, log = train_dlinear(windows, TINY, PredictorConfig(kind="dlinear", kernel_size=5), seed=0)
    assert len(log.epochs) == 3
    assert model.horizon == 6


def test_forecast_bundles_hold_residuals(fhn_small):
    model = NodeModel(2, width=8, depth=1, seed=0)
    bundles = extract_forecast_bundles(model, fhn_small, 15)
    assert len(bundles) == 6
    b = bundles[0]
    assert b.forecast.shape == (15, 2)
    assert np.array_equal(b.errors, b.truth - b.forecast)
    assert np.array_equal(b.errors[0], np.zeros(2))
    assert stack_bundles(bundles, "errors").shape == (6, 15, 2)
    with pytest.raises(ValidationError):
        extract_forecast_bundles(model, fhn_small, 41)


def test_dlinear_bundles_start_after_lookback(fhn_small):
    model = DLinearModel(2, lookback=10, horizon=5, kernel_size=3, seed=0)
    bundles = extract_forecast_bundles(model, fhn_small, 5)
    assert np.array_equal(bundles[0].times, fhn_small[0].times[10:15])


@pytest.mark.parametrize("kind", ["node", "dlinear", "rnn"])
def test_predictor_checkpoint_restores_forecasts(tmp_path, fhn_small, kind):
    config = PredictorConfig(kind=kind, width=8, depth=1, rnn_hidden=4, kernel_size=3)
    model = build_predictor(kind, 2, config, lookback=10, horizon=5, seed=0)
    restored = load_predictor(save_predictor(model, tmp_path / "p.json"))
    assert restored.hyperparameters() == model.hyperparameters()
    assert np.array_equal(restored.forecast_trajectory(fhn_small[0], 5), model.forecast_trajectory(fhn_small[0], 5))


def test_checkpoint_kind_is_checked(tmp_path):
    path = save_predictor(NodeModel(2, width=4, depth=1, seed=0), tmp_path / "p.json")
    with pytest.raises(ValidationError):
        load_corrector(path)
    with pytest.raises(ValidationError):
        load_predictor(tmp_path / "missing.json")


def test_build_predictor_unknown_kind():
    with pytest.raises(ValidationError):
        build_predictor("transformer", 2, PredictorConfig())


@pytest.mark.parametrize("n,fraction,expected", [(10, 0.1, 1), (10, 0.0, 0), (1, 0.5, 0), (2, 0.01, 1), (20, 0.25, 5)])
def test_validation_split_sizes(n, fraction, expected):
    fit, val = validation_split(n, fraction, seed=0)
    assert len(val) == expected
    assert sorted(np.concatenate([fit, val]).tolist()) == list(range(n))


def test_early_stopping_restores_best():
    model = torch.nn.Linear(1, 1, dtype=torch.float64)
    stopper = EarlyStopping(patience=2)
    assert not stopper.update(1, 1.0, model)
    best = model.weight.detach().clone()
    with torch.no_grad():
        model.weight.add_(1.0)
    assert not stopper.update(2, 2.0, model)
    assert stopper.update(3, 3.0, model)
    stopper.restore(model)
    assert torch.equal(model.weight, best)
    assert stopper.best_epoch == 1


def test_training_log_csv(tmp_path, fhn_small):
    _, log = train_node(fhn_small, TINY, PredictorConfig(width=8, depth=1), seed=0)
    path = log.write_csv(tmp_path / "log.csv")
    restored = TrainingLog.read_csv(path, "predictor")
    assert [e.train_loss for e in restored.epochs] == [e.train_loss for e in log.epochs]
