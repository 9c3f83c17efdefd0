import math

import numpy as np
import pytest
import torch

from src.core.errors import StepSizeUnderflowError, ValidationError
from src.core.tensor import DTYPE
from src.solvers.controller import PidState, StepController, pid_next_step
from src.solvers.integrate import integrate_adaptive, integrate_fixed, rk_step, solve
from src.solvers.tableaus import DOPRI5, EULER, HEUN, TABLEAUS, TSIT5, get_tableau


def decay(t, y):
    return -y


def quadratic_decay(t, y):
    return -y * y


def _slope(tableau, f, exact, steps):
    errors = []
    for h in steps:
        result = integrate_fixed(tableau, f, torch.ones(1, dtype=DTYPE), [0.0, 1.0], h)
        errors.append(abs(float(result.states[-1, 0]) - exact))
    return np.polyfit(np.log(steps), np.log(errors), 1)[0]


@pytest.mark.parametrize("tableau", list(TABLEAUS.values()), ids=list(TABLEAUS))
def test_tableaus_are_consistent(tableau):
    tableau.validate()


def test_get_tableau_unknown():
    with pytest.raises(ValidationError):
        get_tableau("rk45")


@pytest.mark.parametrize("tableau,order,tol,steps", [
    (EULER, 1, 0.2, [0.02, 0.01, 0.005, 0.0025]),
    (HEUN, 2, 0.3, [0.04, 0.02, 0.01, 0.005]),
    (DOPRI5, 5, 0.5, [0.25, 0.125, 0.0625]),
], ids=["euler", "heun", "dopri5"])
def test_convergence_order_on_linear_decay(tableau, order, tol, steps):
    assert abs(_slope(tableau, decay, math.exp(-1.0), steps) - order) <= tol


@pytest.mark.parametrize("tableau", [DOPRI5, TSIT5], ids=["dopri5", "tsit5"])
def test_fifth_order_on_nonlinear_decay(tableau):
    assert abs(_slope(tableau, quadratic_decay, 0.5, [0.2, 0.1, 0.05]) - 5) <= 0.5


def test_tsit5_default_tolerances_hit_exp_minus_one():
    result = integrate_adaptive(TSIT5, StepController(rtol=1e-3, atol=1e-6, h0=1e-3), decay,
                                torch.ones(1, dtype=DTYPE), [0.0, 1.0])
    assert abs(float(result.states[-1, 0]) - math.exp(-1.0)) < 1e-4
    assert result.nfe == TSIT5.stages * (result.accepted + result.rejected)


def test_states_land_on_every_eval_time():
    times = [0.0, 0.3, 0.7, 1.5, 2.0]
    result = solve("dopri5", decay, torch.ones(2, dtype=DTYPE), times,
                   StepController(rtol=1e-8, atol=1e-10))
    assert result.states.shape == (5, 2)
    assert torch.allclose(result.states[:, 0], torch.exp(-torch.tensor(times, dtype=DTYPE)), atol=1e-7)
    assert torch.equal(result.states[0], torch.ones(2, dtype=DTYPE))


def test_batched_state_counts_one_evaluation_per_call():
    single = solve("heun", decay, torch.ones(1, dtype=DTYPE), [0.0, 1.0])
    batched = solve("heun", decay, torch.ones(4, 3, dtype=DTYPE), [0.0, 1.0])
    assert batched.states.shape == (2, 4, 3)
    assert batched.nfe == single.nfe


def test_euler_runs_fixed_steps_at_h0():
    result = integrate_adaptive(EULER, StepController(h0=0.1), decay, torch.ones(1, dtype=DTYPE), [0.0, 1.0])
    assert result.accepted == 10
    assert result.rejected == 0
    assert float(result.states[-1, 0]) == pytest.approx(0.9 ** 10, abs=1e-12)


def test_rk_step_error_estimate_empty_without_embedded_pair():
    _, error = rk_step(EULER, decay, 0.0, torch.ones(2, dtype=DTYPE), 0.1)
    assert error.numel() == 0
    _, error = rk_step(HEUN, decay, 0.0, torch.ones(2, dtype=DTYPE), 0.1)
    assert error.shape == (2,)


@pytest.mark.parametrize("times", [[], [0.0, 0.0], [1.0, 0.5], [0.0, float("inf")]])
def test_invalid_eval_times(times):
    with pytest.raises(ValidationError):
        solve("tsit5", decay, torch.ones(1, dtype=DTYPE), times)


def test_step_budget_exhaustion_raises():
    controller = StepController(h0=1e-3, max_steps=5, max_step=1e-3)
    with pytest.raises(StepSizeUnderflowError):
        integrate_adaptive(DOPRI5, controller, decay, torch.ones(1, dtype=DTYPE), [0.0, 1.0])


def test_controller_rejects_nonpositive_settings():
    with pytest.raises(ValidationError):
        StepController(rtol=0.0)
    with pytest.raises(ValidationError):
        StepController(h0=-1.0)


def test_pid_accepts_small_errors_and_grows_step():
    accepted, h_next, state = pid_next_step(StepController(), PidState(), 0.01, 0.1, error_order=5)
    assert accepted
    assert h_next > 0.1
    assert state.prev_error == 0.01


def test_pid_rejects_large_errors_and_shrinks_step():
    state = PidState(prev_error=0.5, prev_prev_error=0.5)
    accepted, h_next, after = pid_next_step(StepController(), state, 4.0, 0.1, error_order=5)
    assert not accepted
    assert h_next < 0.1
    assert after == state


def test_pid_unit_error_scales_by_safety():
    accepted, h_next, state = pid_next_step(StepController(), PidState(), 1.0, 0.1, error_order=5)
    assert accepted
    assert h_next == pytest.approx(0.09, rel=1e-12)
    assert state.prev_error == 1.0


@pytest.mark.parametrize("tableau", [DOPRI5, TSIT5], ids=["dopri5", "tsit5"])
def test_tighter_tolerances_do_not_increase_error(tableau):
    times = np.linspace(0.0, 2.0, 5)
    exact = 1.0 / (1.0 + times)
    errors = []
    for rtol in (1e-3, 5e-4, 2.5e-4):
        controller = StepController(rtol=rtol, atol=rtol * 1e-3, h0=1e-3)
        result = integrate_adaptive(tableau, controller, quadratic_decay, torch.ones(1, dtype=DTYPE), times)
        errors.append(np.max(np.abs(result.states[:, 0].detach().numpy() - exact)))
    assert errors[1] <= errors[0]
    assert errors[2] <= errors[1]


def test_repeated_solves_count_the_same_evaluations():
    controller = StepController(rtol=1e-4, atol=1e-7, h0=1e-3)
    runs = [integrate_adaptive(TSIT5, controller, quadratic_decay, torch.ones(2, dtype=DTYPE), [0.0, 0.5, 3.0])
            for _ in range(3)]
    assert len({(r.nfe, r.accepted, r.rejected) for r in runs}) == 1
    assert all(torch.equal(r.states, runs[0].states) for r in runs)


def test_pid_factor_is_clamped():
    controller = StepController()
    _, h_zero, _ = pid_next_step(controller, PidState(), 0.0, 0.1)
    assert h_zero == pytest.approx(1.0)
    _, h_huge, _ = pid_next_step(controller, PidState(), 1e12, 0.1)
    assert h_huge == pytest.approx(0.01)


def test_gradients_flow_through_adaptive_steps():
    rate = torch.tensor(0.5, dtype=DTYPE, requires_grad=True)
    result = solve("tsit5", lambda t, y: -rate * y, torch.ones(1, dtype=DTYPE), [0.0, 2.0],
                   StepController(rtol=1e-8, atol=1e-10))
    (g,) = torch.autograd.grad(result.states[-1, 0], rate)
    assert float(g) == pytest.approx(-2.0 * math.exp(-1.0), rel=1e-5)
