import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from trigs.integrator import IntegrationError, dopri5


def test_exponential_decay_exact():
    ts = np.linspace(0, 5, 11)
    ys, stats = dopri5(lambda t, y: -y, 0.0, [1.0], 5.0, ts, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(ys[:, 0], np.exp(-ts), rtol=1e-9)
    assert stats.steps > 0 and stats.evaluations >= 6 * stats.steps


def test_harmonic_oscillator_dense_output():
    ts = np.linspace(0, 20, 97)
    ys, _ = dopri5(lambda t, y: np.array([y[1], -y[0]]), 0.0, [1.0, 0.0], 20.0, ts, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(ys[:, 0], np.cos(ts), atol=1e-8)
    np.testing.assert_allclose(ys[:, 1], -np.sin(ts), atol=1e-8)


def test_matches_scipy_dop853_on_damped_oscillator():
    def f(t, y):
        return np.array([y[1], -(3 / t) * y[1] - y[0] - y[0] / t**2])

    ts = np.geomspace(1, 50, 40)
    ys, _ = dopri5(f, 1.0, [1.0, 0.0], 50.0, ts, rtol=1e-10, atol=1e-13)
    ref = solve_ivp(f, (1, 50), [1.0, 0.0], method="DOP853", t_eval=ts, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(ys, ref.y.T, atol=1e-8)


def test_tolerance_halving_reduces_error():
    ts = np.array([3.0])
    f = lambda t, y: np.array([y[1], -y[0]])  # noqa: E731
    errs = []
    for rtol in (1e-5, 1e-7, 1e-9):
        ys, _ = dopri5(f, 0.0, [1.0, 0.0], 3.0, ts, rtol=rtol, atol=rtol * 1e-2)
        errs.append(abs(ys[0, 0] - math.cos(3.0)))
    assert errs[2] < errs[1] < errs[0]


def test_samples_at_endpoints():
    ys, _ = dopri5(lambda t, y: np.ones(1), 0.0, [0.0], 2.0, [0.0, 2.0])
    assert ys[0, 0] == 0.0
    assert ys[1, 0] == pytest.approx(2.0)


def test_max_step_respected():
    _, loose = dopri5(lambda t, y: -y, 0.0, [1.0], 10.0, [10.0])
    _, capped = dopri5(lambda t, y: -y, 0.0, [1.0], 10.0, [10.0], max_step=0.1)
    assert capped.steps >= 100 > loose.steps


def test_blowup_raises_with_state():
    with pytest.raises(IntegrationError) as info:
        dopri5(lambda t, y: y**2, 0.0, [1.0], 2.0, [2.0])
    assert info.value.t < 1.0 + 1e-6
    assert np.all(np.isfinite(info.value.y))


def test_bad_arguments():
    with pytest.raises(ValueError):
        dopri5(lambda t, y: y, 1.0, [1.0], 0.5, [])
    with pytest.raises(ValueError):
        dopri5(lambda t, y: y, 0.0, [1.0], 1.0, [0.5, 0.2])
