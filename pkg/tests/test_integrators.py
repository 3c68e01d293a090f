import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from dsm_decay import integrate
from dsm_decay.errors import BlowUp, DecayError, StepUnderflow


def test_exponential_decay():
    sol = integrate(lambda t, y: -y, 0.0, [1.0], 1.0, rtol=1e-10, atol=1e-14)
    assert sol.y_final[0] == pytest.approx(math.exp(-1.0), abs=1e-10)
    assert sol.status == "ok" and sol.t_final == 1.0


def test_dense_output_against_closed_form():
    sol = integrate(lambda t, y: -y, 0.0, [1.0], 5.0, rtol=1e-10, atol=1e-14)
    t = np.linspace(0.0, 5.0, 513)
    np.testing.assert_allclose(sol(t)[:, 0], np.exp(-t), atol=1e-9)


def test_halving_rtol_reduces_error():
    errs = []
    for rtol in (1e-5, 5e-6, 2.5e-6, 1.25e-6):
        sol = integrate(lambda t, y: -y, 0.0, [1.0], 10.0, rtol=rtol, atol=1e-14)
        t = np.linspace(0.0, 10.0, 201)
        errs.append(np.max(np.abs(sol(t)[:, 0] - np.exp(-t))))
    # Tolerance proportionality of a fifth-order pair; check over successive halvings.
    assert errs[0] / errs[2] >= 2.0
    assert errs[1] / errs[3] >= 2.0
    assert all(e1 < e0 for e0, e1 in zip(errs, errs[1:]))


def van_der_pol(t, y, mu=2.0):
    return np.array([y[1], mu * (1 - y[0] ** 2) * y[1] - y[0]])


def test_matches_scipy_reference_on_nonlinear_system():
    sol = integrate(van_der_pol, 0.0, [2.0, 0.0], 10.0, rtol=1e-10, atol=1e-12)
    ref = solve_ivp(van_der_pol, (0.0, 10.0), [2.0, 0.0], method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
    t = np.linspace(0.0, 10.0, 101)
    np.testing.assert_allclose(sol(t), ref.sol(t).T, atol=1e-7)


def test_time_dependent_coefficients_vs_scipy():
    def rhs(t, y):
        return np.array([-2 / (1 + t) * y[0] + 0.5 * y[0] ** 2 + 0.5 / (1 + t) ** 2])

    sol = integrate(rhs, 0.0, [0.7], 20.0, rtol=1e-10, atol=1e-14)
    ref = solve_ivp(rhs, (0.0, 20.0), [0.7], method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
    t = np.linspace(0.0, 20.0, 41)
    np.testing.assert_allclose(sol(t)[:, 0], ref.sol(t)[0], rtol=1e-8, atol=1e-12)


def test_riccati_blowup_escape_time():
    with pytest.raises(BlowUp) as info:
        integrate(lambda t, y: y**2, 0.0, [1.0], 2.0, rtol=1e-10, atol=1e-14)
    exc = info.value
    assert 0.99 < exc.escape_time < 1.01
    assert exc.escape_time == pytest.approx(1.0, abs=1e-8)
    partial = exc.trajectory
    assert partial.status == "blowup"
    assert partial.t_final == exc.escape_time


def test_step_underflow():
    # An oscillation that needs steps far below a deliberately coarse floor.
    with pytest.raises(StepUnderflow) as info:
        integrate(lambda t, y: 100 * np.cos(100 * t) * np.ones(1), 0.0, [0.0], 1.0, rtol=1e-10, step_floor=0.1)
    assert info.value.solution.status == "underflow"
    assert info.value.t is not None


def test_projection_clamps_state():
    sol = integrate(lambda t, y: np.array([-1.0]), 0.0, [0.5], 2.0, project=lambda y: np.maximum(y, 0.0))
    assert np.all(sol.y_steps >= 0)
    assert sol.y_final[0] == 0.0


def test_dense_output_outside_range():
    sol = integrate(lambda t, y: -y, 0.0, [1.0], 1.0)
    with pytest.raises(DecayError):
        sol([1.5])


def test_requires_forward_interval():
    with pytest.raises(DecayError):
        integrate(lambda t, y: -y, 1.0, [1.0], 1.0)


def test_counts_steps():
    sol = integrate(lambda t, y: -y, 0.0, [1.0], 1.0, rtol=1e-10, atol=1e-14)
    assert sol.accepted == len(sol.t_steps) - 1 > 0
    assert sol.rejected >= 0
