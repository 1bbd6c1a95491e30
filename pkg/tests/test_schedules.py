import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from trigs.schedules import (
    Certificate,
    ConstantSchedule,
    PowerSchedule,
    RationalSchedule,
    admissible_K_range,
    big_m,
    cd_check,
    eps_floor,
    log_big_m,
    log_big_m_quad,
    mu,
    parse_schedule,
    rate_bound,
    select_K,
)


def numeric_slope(s, t, h=1e-5):
    f = lambda u: 1 / math.sqrt(s.eps(u))  # noqa: E731
    return (f(t + h) - f(t - h)) / (2 * h)


@pytest.mark.parametrize(
    "schedule, expected",
    [(RationalSchedule(0.2, 0.0), 0.2), (PowerSchedule(1.0, 2.0), 1.0), (ConstantSchedule(3.0), 0.0)],
)
def test_inv_sqrt_eps_slope(schedule, expected):
    for t in (1.0, 7.0, 300.0):
        assert schedule.inv_sqrt_eps_slope(t) == pytest.approx(expected, abs=1e-12)
        assert numeric_slope(schedule, t + 1e-3) == pytest.approx(expected, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 10), st.floats(0.05, 2.0), st.floats(1.5, 1e3))
def test_power_slope_and_derivative_match_finite_differences(c, r, t):
    s = PowerSchedule(c, r)
    assert s.inv_sqrt_eps_slope(t) == pytest.approx(numeric_slope(s, t), rel=1e-5, abs=1e-9)
    h = 1e-6 * t
    assert s.eps_dot(t) == pytest.approx((s.eps(t + h) - s.eps(t - h)) / (2 * h), rel=1e-5)


def test_eps_vanishes_and_is_nonincreasing():
    t = np.geomspace(1, 1e8, 50)
    for s in (PowerSchedule(1, 0.5), PowerSchedule(2, 2), RationalSchedule(0.3, 1)):
        e = s.eps(t)
        assert np.all(np.diff(e) < 0)
        assert e[-1] < 1e-3 * e[0]


def test_admissible_K_range():
    assert admissible_K_range(2.0) == (1.0, 2.0)
    lo, hi = admissible_K_range(3.0)
    assert lo == pytest.approx((3 + math.sqrt(5)) / 2) and hi == 3.0
    assert not Certificate(2.0, 2.0).admissible
    assert Certificate(2.0, 1.9).admissible


def test_cd_check_examples():
    v = cd_check(RationalSchedule(0.2, 0.0), Certificate(2.0, 1.5), 1e4)
    assert v.satisfied and v.margin == pytest.approx(0.3)
    assert not cd_check(PowerSchedule(1.0, 2.0), Certificate(2.0, 1.5), 1e4).satisfied
    v = cd_check(PowerSchedule(16.0, 2.0), Certificate(2.0, 1.5), 1e4)
    assert v.satisfied and v.margin == pytest.approx(0.25)
    with pytest.raises(ValueError, match="admissible"):
        cd_check(RationalSchedule(0.2), Certificate(2.0, 2.0), 1e4)


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from(["power", "rational", "const"]),
    st.floats(0.05, 5),
    st.floats(0.1, 2.0),
    st.floats(0.5, 4.0),
    st.floats(0.01, 0.99),
)
def test_cd_check_matches_analytic_slope(family, p1, p2, delta, kfrac):
    """Verdict equals the sign of bound - max slope, computed in closed form."""
    if family == "power":
        s = PowerSchedule(p1, p2)
    elif family == "rational":
        s = RationalSchedule(p1, p2)
    else:
        s = ConstantSchedule(p1)
    lo, hi = admissible_K_range(delta)
    K = lo + kfrac * (hi - lo)
    cert = Certificate(delta, K)
    horizon = 1e3
    bound = min(2 * K - delta, delta - K)
    if family == "power":
        # 0.5 r t^(r/2 - 1) / sqrt(c): increasing for r > 2, otherwise max at t1 (r < 2) or constant
        max_slope = 0.5 * p2 / math.sqrt(p1) * (1.0 if p2 <= 2 else horizon ** (p2 / 2 - 1))
    elif family == "rational":
        max_slope = p1
    else:
        max_slope = 0.0
    v = cd_check(s, cert, horizon)
    assert v.margin == pytest.approx(bound - max_slope, abs=1e-12)
    assert v.satisfied == (bound - max_slope >= 0)


def test_select_K_midpoint_of_feasible_candidates():
    K = select_K(RationalSchedule(0.2), 2.0, 1e3)
    assert 1.1 <= K <= 1.8
    assert cd_check(RationalSchedule(0.2), Certificate(2.0, K), 1e3).satisfied
    with pytest.raises(ValueError):
        select_K(RationalSchedule(2 / 3), 2.0, 1e3)


def test_mu_examples():
    cert = Certificate(2.0, 1.5)
    assert mu(PowerSchedule(1.0, 1.0), cert, 4.0) == pytest.approx(0.375)
    assert mu(ConstantSchedule(4.0), cert, 9.0) == pytest.approx(0.5 * 2.0)
    M = 0.2
    for t in (1.0, 3.0, 50.0):
        assert mu(RationalSchedule(M, 0.0), cert, t) == pytest.approx((M + 0.5) / (M * t))


def test_big_m_examples():
    cert = Certificate(2.0, 1.5, 1.0)
    assert big_m(RationalSchedule(0.2, 0.0), cert, 1.0) == 1.0
    assert big_m(RationalSchedule(0.2, 0.0), cert, 2.0) == pytest.approx(2**3.5)
    assert big_m(PowerSchedule(1.0, 1.0), cert, 4.0) == pytest.approx(2 * math.e)


@pytest.mark.parametrize(
    "schedule",
    [RationalSchedule(0.2, 0.0), RationalSchedule(0.5, 2.0), PowerSchedule(1.0, 1.0), PowerSchedule(2.0, 2.0),
     PowerSchedule(0.7, 1.5), ConstantSchedule(0.5)],
)
def test_closed_form_big_m_matches_quadrature(schedule):
    cert = Certificate(2.0, 1.4, 1.0)
    t = np.array([1.0, 1.5, 10.0, 200.0])
    np.testing.assert_allclose(log_big_m(schedule, cert, t), log_big_m_quad(schedule, cert, t), rtol=1e-6, atol=1e-9)


def test_rate_bound_trivial_cases():
    s, cert = RationalSchedule(0.2, 0.0), Certificate(2.0, 1.5)
    assert rate_bound(s, cert, 0.0, 3.0, 7.0) == pytest.approx(3.0 / big_m(s, cert, 7.0))
    assert rate_bound(s, cert, 2.0, 3.0, 1.0) == pytest.approx(3.0)


@pytest.mark.parametrize(
    "schedule", [RationalSchedule(0.2, 0.0), RationalSchedule(0.3, 1.0), PowerSchedule(2.0, 2.0), PowerSchedule(1.0, 1.0)]
)
def test_rate_bound_matches_direct_quadrature(schedule):
    cert = Certificate(2.0, 1.4)
    for t in (2.0, 30.0):
        lt = log_big_m_quad(schedule, cert, t)
        w = integrate.quad(lambda s: schedule.eps(s) ** 1.5 * math.exp(log_big_m_quad(schedule, cert, s) - lt), 1.0, t,
                           epsrel=1e-10)[0]
        expected = 0.5 * cert.K * 4.0 * w + 2.0 * math.exp(-lt)
        assert rate_bound(schedule, cert, 2.0, 2.0, t) == pytest.approx(expected, rel=1e-7)


def test_rational_bound_limit():
    M, C = 0.2, 1.0
    cert = Certificate(2.0, 1.5)
    xs = 1.3
    limit = cert.K * xs**2 / (2 * (-M + cert.delta - cert.K))
    t = 1e7
    assert rate_bound(RationalSchedule(M, C), cert, xs, 5.0, t) * (M * t + C) ** 2 == pytest.approx(limit, rel=1e-4)


def test_eps_floor_below_schedule():
    cert = Certificate(2.0, 1.5)
    for s in (RationalSchedule(0.2), PowerSchedule(16.0, 2.0)):
        t = np.geomspace(1, 1e4, 30)
        assert np.all(eps_floor(s, cert, t) <= s.eps(t) * (1 + 1e-12))


def test_parse_schedule():
    assert parse_schedule("power:c=1,r=2") == PowerSchedule(1.0, 2.0)
    assert parse_schedule("rational:M=0.2,C=0") == RationalSchedule(0.2, 0.0)
    assert parse_schedule("const:c=3") == ConstantSchedule(3.0)
    s = parse_schedule("power:c=2,r=1.5", t0=2.0)
    assert parse_schedule(s.spec(), 2.0) == s
    for bad in ("power:c=1,r=2.5", "power:r=0", "rational:M=-1", "power:q=1", "cosine:c=1", "power:c=x"):
        with pytest.raises(ValueError):
            parse_schedule(bad)


def test_time_before_start_rejected():
    with pytest.raises(ValueError):
        PowerSchedule(1.0, 1.0, t0=2.0).eps(1.0)
