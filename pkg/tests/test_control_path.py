import numpy as np
import pytest
import torch

from src.core.errors import ValidationError
from src.core.tensor import DTYPE
from src.paths.control_path import (
    Interpolation,
    eval_path,
    eval_path_derivative,
    fit_path,
    with_time_channel,
)


@pytest.fixture
def knots(rng):
    times = np.cumsum(rng.uniform(0.2, 1.0, size=8))
    values = rng.normal(size=(3, 8, 2))
    return torch.tensor(times, dtype=DTYPE), torch.tensor(values, dtype=DTYPE)


def _hermite_oracle(t0, t1, p0, p1, m0, m1, s):
    h = t1 - t0
    tau = (s - t0) / h
    h00 = 2 * tau ** 3 - 3 * tau ** 2 + 1
    h10 = tau ** 3 - 2 * tau ** 2 + tau
    h01 = -2 * tau ** 3 + 3 * tau ** 2
    h11 = tau ** 3 - tau ** 2
    return h00 * p0 + h10 * h * m0 + h01 * p1 + h11 * h * m1


@pytest.mark.parametrize("scheme", ["hermite", "linear"])
def test_path_hits_every_knot(knots, scheme):
    times, values = knots
    path = fit_path(times, values, scheme)
    for i, t in enumerate(times.tolist()):
        assert torch.allclose(eval_path(path, t), values[:, i, :], atol=1e-12, rtol=0)


@pytest.mark.parametrize("scheme", ["hermite", "linear"])
def test_derivative_matches_finite_differences(knots, scheme):
    times, values = knots
    path = fit_path(times, values, scheme)
    eps = 1e-6
    for i in range(len(times) - 1):
        s = float(times[i] + 0.37 * (times[i + 1] - times[i]))
        fd = (eval_path(path, s + eps) - eval_path(path, s - eps)) / (2 * eps)
        assert torch.allclose(eval_path_derivative(path, s), fd, atol=1e-6, rtol=0)


def test_hermite_segment_matches_basis_oracle(knots):
    times, values = knots
    path = fit_path(times, values, Interpolation.HERMITE)
    t = times.tolist()
    x = values[0, :, 0].tolist()
    slopes = [(x[i] - x[i - 1]) / (t[i] - t[i - 1]) for i in range(1, len(t))]
    slopes = [slopes[0]] + slopes
    for i in range(len(t) - 1):
        for frac in (0.1, 0.5, 0.9):
            s = t[i] + frac * (t[i + 1] - t[i])
            expected = _hermite_oracle(t[i], t[i + 1], x[i], x[i + 1], slopes[i], slopes[i + 1], s)
            assert abs(float(eval_path(path, s)[0, 0]) - expected) < 1e-10


def test_time_channel_has_unit_derivative(knots):
    times, values = knots
    path = fit_path(times, with_time_channel(times, values))
    assert path.channels == 3
    for s in np.linspace(float(times[0]), float(times[-1]), 13):
        assert torch.allclose(eval_path_derivative(path, float(s))[..., -1],
                              torch.ones(3, dtype=DTYPE), atol=1e-12)


def test_linear_path_is_piecewise_linear(knots):
    times, values = knots
    path = fit_path(times, values, "linear")
    mid = 0.5 * float(times[2] + times[3])
    assert torch.allclose(eval_path(path, mid), 0.5 * (values[:, 2] + values[:, 3]), atol=1e-12)


def test_path_domain_and_knot_checks(knots):
    times, values = knots
    path = fit_path(times, values)
    with pytest.raises(ValidationError):
        eval_path(path, float(times[-1]) + 1.0)
    with pytest.raises(ValidationError):
        fit_path(times[:1], values[:, :1])
    with pytest.raises(ValidationError):
        fit_path(times.flip(0), values)
    with pytest.raises(ValidationError):
        fit_path(times, values[:, :-1])


def test_unknown_scheme_is_rejected(knots):
    times, values = knots
    with pytest.raises(ValueError):
        fit_path(times, values, "spline")
