import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trigs.continuous import AVD, TRIGS, integrate
from trigs.diagnostics import (
    ball_regime,
    discrete_energy,
    envelope_nonincreasing,
    lyapunov_critical,
    lyapunov_general,
    min_norm_gap,
    partial_sum_growth,
    rate_fit,
    select_critical_K,
)
from trigs.discrete import IpatreParams, IterateLog, ipatre_run
from trigs.objectives import make_least_squares, make_quad1d, resolve_problem
from trigs.schedules import Certificate, PowerSchedule, RationalSchedule


def test_rate_fit_exact_power_law():
    t = np.geomspace(1, 1e3, 200)
    rep = rate_fit(t, t**-2.0)
    assert abs(rep.slope + 2.0) <= 1e-12
    assert rep.rms <= 1e-12
    assert rep.window[1] == pytest.approx(1e3)
    assert rep.window[0] == pytest.approx(math.sqrt(1e3), rel=0.05)


@settings(max_examples=40, deadline=None)
@given(st.floats(-4, 1), st.floats(0.01, 100))
def test_rate_fit_exact_on_synthetic_power_laws(p, a):
    t = np.geomspace(1, 1e4, 300)
    assert rate_fit(t, a * t**p).slope == pytest.approx(p, abs=1e-12)


def test_rate_fit_wobbly_series():
    t = np.geomspace(1, 1e3, 500)
    rep = rate_fit(t, t**-0.5 * (1 + 0.01 * np.sin(np.log(t))))
    assert -0.55 <= rep.slope <= -0.45


def test_rate_fit_log_correction_and_semilog():
    t = np.geomspace(2, 1e4, 400)
    assert rate_fit(t, np.log(t) / t**2, log_correction=True).slope == pytest.approx(-2.0, abs=1e-12)
    t = np.linspace(1, 20, 100)
    assert rate_fit(t, 3 * np.exp(-1.5 * t), scale="semilog").slope == pytest.approx(-1.5, abs=1e-12)


def test_rate_fit_drops_nonpositive_and_needs_points():
    t = np.geomspace(1, 100, 100)
    y = t**-1.0
    y[-5:] = 0.0
    rep = rate_fit(t, y)
    assert rep.n_dropped == 5
    assert rep.slope == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(ValueError):
        rate_fit(t, np.zeros_like(t))
    with pytest.raises(ValueError):
        rate_fit(t, y, window_fraction=0.0)


def test_rate_report_pass_and_json():
    t = np.geomspace(1, 100, 50)
    rep = rate_fit(t, t**-1.0, target_slope=-0.5, margin=0.15)
    assert rep.passed
    d = rep.to_json()
    assert d["pass"] is True and isinstance(d["window"], list)
    assert rate_fit(t, t**-0.2, target_slope=-0.5, margin=0.15).passed is False


def test_min_norm_gap_and_regime():
    xs = np.zeros((10, 2))
    assert min_norm_gap(xs, [0.0, 0.0]) == (0.0, 0.0)
    xs = np.array([[2.0, 0.0], [1.0, 0.0], [0.5, 0.0], [0.7, 0.0]])
    final, tail = min_norm_gap(xs, [0.0, 0.0], t=np.arange(4), tail_from=1)
    assert final == 0.7 and tail == 0.5
    star = np.array([1.0, 0.0])
    assert ball_regime(np.array([[0.1, 0], [0.2, 0]]), star) == "inside"
    assert ball_regime(np.array([[2.0, 0], [3.0, 0]]), star) == "outside"
    assert ball_regime(np.array([[0.5, 0], [2.0, 0], [0.5, 0], [2.0, 0]]), star) == "crossing"


def test_envelope_and_partial_sums():
    k = np.arange(1, 1001, dtype=float)
    assert envelope_nonincreasing(1 / k * (1 + 0.5 * np.sin(k)))
    assert not envelope_nonincreasing(k)
    assert envelope_nonincreasing(np.zeros(50))
    terms = 1 / k**2
    assert partial_sum_growth(terms, 100) == pytest.approx(np.sum(terms[100:]) / np.sum(terms))
    assert partial_sum_growth(np.zeros(5), 2) == 0.0


def test_general_lyapunov_zero_at_equilibrium():
    obj = make_least_squares(np.eye(2), np.zeros(2))
    sch = RationalSchedule(0.2)
    traj = integrate(TRIGS(obj, 2.0, sch), [0.0, 0.0], t_end=50, samples=30)
    ly = lyapunov_general(traj, obj, sch, Certificate(2.0, 1.5))
    assert np.all(ly.energy == 0.0)


def test_general_lyapunov_certificate_on_degenerate_problem():
    obj = resolve_problem("ls:2,1")
    sch = RationalSchedule(0.2)
    traj = integrate(TRIGS(obj, 2.0, sch), [1.0, 1.0], t_end=300, samples=300, atol=1e-14)
    ly = lyapunov_general(traj, obj, sch, Certificate(2.0, 1.45))
    assert ly.max_gronwall <= 1e-4 * (1 + ly.energy[0])
    scaled = ly.energy * (0.2 * traj.t) ** 2
    assert np.max(scaled[150:]) <= np.max(scaled[:150]) * 10


def test_select_critical_K():
    K = select_critical_K(4.0, 1.0)
    assert K == pytest.approx(2.809, abs=0.01)
    assert (4 - K - 1) * K <= 1.0
    assert select_critical_K(3.0, 1.0) == 2.0
    with pytest.raises(ValueError):
        select_critical_K(2.5, 1.0)


def test_critical_lyapunov():
    obj = make_least_squares(np.eye(2), np.zeros(2))
    traj = integrate(AVD(obj, 4.0, PowerSchedule(1.0, 2.0)), [0.0, 0.0], t_end=20, samples=20)
    assert np.all(lyapunov_critical(traj, obj, 4.0, 1.0).energy == 0.0)
    obj = resolve_problem("ls:2,1")
    traj = integrate(AVD(obj, 4.0, PowerSchedule(1.0, 2.0)), [1.0, 1.0], t_end=1e3, samples=300, atol=1e-14)
    cl = lyapunov_critical(traj, obj, 4.0, 1.0)
    assert np.isfinite(cl.tail_sup())
    assert cl.tail_sup() <= 2 * np.max(cl.normalized[:150])
    with pytest.raises(ValueError):
        lyapunov_critical(traj, obj, 4.0, 1.0, K=2.0)


def test_discrete_energy_hand_value():
    obj = make_quad1d()
    log = IterateLog("ipatre", {}, np.array([1, 2]), np.array([[1.0], [0.5]]), np.zeros(2), np.zeros(2), np.zeros(2),
                     np.zeros(2))
    # a_1 = 2.5, b_1 = 1, d_1 = 0.5 (1 - 4/2) 2^2 / 2^2 = -0.5
    # E_2 = (2.5 * 1 + 1 * (0.5 - 1 + 0.5))^2 - 0.5 * 1^2 = 5.75
    E = discrete_energy(log, obj, 2.5, 1.0, 4.0, 1.0)
    assert E.shape == (1,)
    assert E[0] == pytest.approx(5.75)


def test_discrete_energy_zero_iterates_and_bounded_run():
    obj = make_quad1d()
    zero = ipatre_run(obj, IpatreParams(4.0, 1.0, 20, [0.0]))
    assert np.all(discrete_energy(zero, obj, 2.5, 0.9, 4.0, 1.0) == 0.0)
    log = ipatre_run(obj, IpatreParams(4.0, 1.0, 20000, [1.0]))
    E = discrete_energy(log, obj, 2.5, 0.9, 4.0, 1.0)
    assert np.all(np.isfinite(E)) and np.max(E[1000:]) <= np.max(E[:1000])
    with pytest.raises(ValueError):
        discrete_energy(log, obj, 3.5, 0.9, 4.0, 1.0)
    with pytest.raises(ValueError):
        discrete_energy(log, obj, 2.5, 1.2, 4.0, 1.0)
