import itertools
import json

import numpy as np
import pandas as pd
import pytest

from src.config.run_config import EvaluationConfig
from src.core.errors import ValidationError
from src.evaluation import plots
from src.evaluation.report import EvalReport, evaluate_arrays, evaluate_bundles, write_report
from src.evaluation.scores import (
    NO_HORIZON,
    cumulative_mse,
    extrapolation_horizon,
    mae,
    pareto_points,
    reduction_curve,
    reduction_percent,
    scan_cutoffs,
    stress_curve,
)
from src.models.bundles import ForecastBundle
from src.models.mlp_corrector import MlpCorrectorModel
from src.training.loop import EpochLog, TrainingLog


def test_cumulative_mse_is_inclusive():
    truth = np.zeros((4, 1))
    pred = np.array([[1.0], [2.0], [3.0], [4.0]])
    assert cumulative_mse(pred, truth, 0) == 1.0
    assert cumulative_mse(pred, truth, 1) == 2.5
    assert cumulative_mse(pred, truth, 3) == 7.5
    with pytest.raises(ValidationError):
        cumulative_mse(pred, truth, 4)


def test_cumulative_mse_batched_and_weighted():
    truth = np.zeros((2, 3, 2))
    pred = np.ones((2, 3, 2))
    pred[1, :, 1] = 3.0
    weights = np.ones_like(pred)
    weights[1, :, 1] = 0.0
    assert cumulative_mse(pred, truth, 2) == pytest.approx((9 * 3 + 9) / 12)
    assert cumulative_mse(pred, truth, 2, weights) == 1.0


# (w/o, w/, rounded reduction %) for FitzHugh-Nagumo at 20/50/80/100% observed points,
# interpolation then extrapolation
FHN_ROWS = [
    (0.225, 0.164, 27), (0.161, 0.128, 20), (0.150, 0.093, 38), (0.137, 0.097, 29),
    (0.242, 0.231, 5), (0.178, 0.171, 4), (0.192, 0.183, 4), (0.166, 0.158, 5),
]


@pytest.mark.parametrize("without,with_,rounded", FHN_ROWS)
def test_reduction_percent_reproduces_rounded_values(without, with_, rounded):
    assert abs(reduction_percent(without, with_) - rounded) <= 1.0


def test_reduction_percent_sign_and_zero():
    assert reduction_percent(2.0, 1.0) == 50.0
    assert reduction_percent(1.0, 1.0601) == pytest.approx(-6.01)
    with pytest.raises(ValidationError):
        reduction_percent(0.0, 1.0)


@pytest.mark.parametrize("curve,threshold,expected", [
    ({50: 20.0, 100: 5.0, 150: 3.0, 200: 2.9}, 3.0, 150),
    ({50: 2.0, 100: 1.0}, 3.0, NO_HORIZON),
    ({50: 10.0, 100: -4.0, 150: 4.0}, 3.0, 150),
    ({5: 3.5}, 3.0, 5),
    ({50: 10.0, 100: 4.0}, 5.0, 50),
])
def test_extrapolation_horizon(curve, threshold, expected):
    assert extrapolation_horizon(curve, threshold) == expected


def test_extrapolation_horizon_empty_curve():
    with pytest.raises(ValidationError):
        extrapolation_horizon({})


def test_reduction_curve_and_scan(rng):
    truth = rng.normal(size=(3, 30, 2))
    uncorrected = truth + 0.5
    corrected = truth + 0.25
    curve = reduction_curve(corrected, uncorrected, truth, scan_cutoffs(30, 5, 5))
    assert list(curve) == [5, 10, 15, 20, 25]
    assert all(v == pytest.approx(75.0) for v in curve.values())
    with pytest.raises(ValidationError):
        scan_cutoffs(30, 5, 0)


def _dominated(p, runs):
    return any(q[0] <= p[0] and q[1] >= p[1] and q != p for q in runs)


def test_pareto_matches_brute_force(rng):
    for _ in range(20):
        runs = [tuple(x) for x in rng.integers(0, 10, size=(12, 2)).astype(float)]
        front = pareto_points(runs)
        assert front == [p for p in runs if not _dominated(p, runs)]
        for a, b in itertools.combinations(front, 2):
            assert not (a[0] <= b[0] and a[1] >= b[1] and a != b)


def test_pareto_keeps_input_order():
    runs = [(30.0, 100.0), (10.0, 50.0), (20.0, 150.0), (40.0, 140.0)]
    assert pareto_points(runs) == [(10.0, 50.0), (20.0, 150.0)]


def test_stress_curve_grid_and_logs():
    truth = np.zeros((2, 400, 1))
    uncorrected = np.ones_like(truth)
    corrected = np.full_like(truth, np.exp(-1.0))
    stress = stress_curve(corrected, uncorrected, truth, max_cutoff=400, step=5)
    assert stress["cutoff"][0] == 5.0
    assert stress["cutoff"][-1] == 399.0
    assert len(stress["cutoff"]) == 80
    assert all(v == 0.0 for v in stress["uncorrected"])
    assert all(v == pytest.approx(-2.0) for v in stress["corrected"])
    with pytest.raises(ValidationError):
        stress_curve(corrected, uncorrected, truth, max_cutoff=500)


def test_mae():
    assert mae(np.array([[1.0, -1.0]]), np.zeros((1, 2))) == 1.0


def _arrays(rng, length=60):
    truth = rng.normal(size=(4, length, 2))
    forecast = truth + np.linspace(0, 1, length)[None, :, None]
    corrected = truth + 0.5 * np.linspace(0, 1, length)[None, :, None]
    return forecast, corrected, truth


def test_evaluate_arrays_layout(rng):
    forecast, corrected, truth = _arrays(rng)
    report = evaluate_arrays(forecast, corrected, truth, EvaluationConfig(interpolation_cutoff=12, scan_step=5))
    cutoffs = [r.cutoff for r in report.cutoffs]
    assert cutoffs == sorted(set(range(5, 60, 5)) | {12})
    assert report.interpolation_reduction == pytest.approx(75.0)
    assert report.extrapolation_horizon == 55
    assert report.stress is None
    assert all(r.mse_with < r.mse_without for r in report.cutoffs)


def test_evaluate_arrays_rejects_long_cutoff(rng):
    forecast, corrected, truth = _arrays(rng, length=20)
    with pytest.raises(ValidationError):
        evaluate_arrays(forecast, corrected, truth, EvaluationConfig(interpolation_cutoff=50))


def test_evaluate_bundles_with_mlp_corrector(fhn_small):
    bundles = [ForecastBundle.from_forecast(t.times, 0.9 * t.states, t.states) for t in fhn_small]
    corrector = MlpCorrectorModel(2, width=4, depth=1, seed=0)
    log = TrainingLog(phase="corrector", epochs=[EpochLog(epoch=1, train_loss=1.0, nfe=12.0, wall_clock=0.5)])
    report = evaluate_bundles(bundles, corrector, EvaluationConfig(interpolation_cutoff=20), log, {"seed": 0})
    assert report.n_trajectories == 6
    assert report.length == 40
    assert report.nfe_log == [12.0]
    assert report.config == {"seed": 0}
    with pytest.raises(ValidationError):
        evaluate_bundles([], corrector, EvaluationConfig())


def test_write_report_files(tmp_path, rng):
    forecast, corrected, truth = _arrays(rng, length=60)
    report = evaluate_arrays(forecast, corrected, truth,
                             EvaluationConfig(interpolation_cutoff=12, stress_cutoff=50))
    report.nfe_log = [20.0, 18.0, 17.5]
    written = write_report(report, tmp_path / "eval")
    assert set(written) == {"json", "csv", "stress_csv", "reduction_svg", "stress_svg", "nfe_svg"}

    frame = pd.read_csv(written["csv"])
    assert list(frame.columns) == ["cutoff", "mse_without", "mse_with", "reduction_percent"]
    assert len(frame) == len(report.cutoffs)

    restored = EvalReport.model_validate(json.loads(written["json"].read_text()))
    assert restored.interpolation_reduction == report.interpolation_reduction
    assert restored.reduction_by_cutoff() == report.reduction_by_cutoff()
    assert written["stress_svg"].read_text().startswith("<svg")


def test_write_report_without_plots(tmp_path, rng):
    forecast, corrected, truth = _arrays(rng)
    report = evaluate_arrays(forecast, corrected, truth, EvaluationConfig(interpolation_cutoff=12))
    assert set(write_report(report, tmp_path, plots_enabled=False)) == {"json", "csv"}


def test_render_plot_skips_non_finite_points():
    svg = plots.render_plot({"a": ([0.0, 1.0, 2.0], [1.0, float("-inf"), 3.0])}, title="t & u")
    assert "<polyline" in svg
    assert "t &amp; u" in svg
    with pytest.raises(ValidationError):
        plots.render_plot({"a": ([0.0], [float("nan")])})


def test_pareto_plot(tmp_path):
    runs = [(30.0, 100.0), (10.0, 50.0), (20.0, 150.0)]
    path = plots.plot_pareto(tmp_path / "pareto.svg", runs, pareto_points(runs))
    assert path.read_text().count("<circle") == 5
