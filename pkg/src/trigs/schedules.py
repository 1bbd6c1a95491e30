"""Tikhonov schedules eps(t) and the controlled-decay certificate.

Three families are supported:

* ``PowerSchedule(c, r)``      eps(t) = c / t**r,        0 < r <= 2
* ``RationalSchedule(M, C)``   eps(t) = 1 / (M t + C)**2
* ``ConstantSchedule(c)``      eps(t) = c                (tests only)

A :class:`Certificate` ``(delta, K, t1)`` carries the Lyapunov parameter.
``mu`` and ``big_m`` give the decay rate and the integrating factor of the
value bound, and ``rate_bound`` evaluates the bound itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate


def _check_time(t, t0):
    if isinstance(t, (float, int)):  # scalar fast path, the integrator's hot loop
        if t < t0:
            raise ValueError(f"t must be >= t0 = {t0}")
        return float(t)
    t = np.asarray(t, dtype=float)
    if np.any(t < t0):
        raise ValueError(f"t must be >= t0 = {t0}")
    return t


def _out(x):
    if isinstance(x, float):
        return x
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class PowerSchedule:
    c: float = 1.0
    r: float = 2.0
    t0: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"power schedule needs c > 0, got {self.c}")
        if not 0 < self.r <= 2:
            raise ValueError(f"power schedule needs r in (0,2], got {self.r}")
        if not self.t0 > 0:
            raise ValueError(f"t0 must be positive, got {self.t0}")

    @property
    def family(self) -> str:
        return "power"

    def eps(self, t):
        t = _check_time(t, self.t0)
        return _out(self.c * t ** -self.r)

    def eps_dot(self, t):
        t = _check_time(t, self.t0)
        return _out(-self.r * self.c * t ** (-self.r - 1))

    def inv_sqrt_eps_slope(self, t):
        t = _check_time(t, self.t0)
        return _out(0.5 * self.r * t ** (0.5 * self.r - 1) / math.sqrt(self.c))

    def spec(self) -> str:
        return f"power:c={self.c!r},r={self.r!r}"


@dataclass(frozen=True)
class RationalSchedule:
    M: float = 1.0
    C: float = 0.0
    t0: float = 1.0

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError(f"rational schedule needs M > 0, got {self.M}")
        if self.C < 0:
            raise ValueError(f"rational schedule needs C >= 0, got {self.C}")
        if not self.t0 > 0:
            raise ValueError(f"t0 must be positive, got {self.t0}")

    @property
    def family(self) -> str:
        return "rational"

    def eps(self, t):
        t = _check_time(t, self.t0)
        return _out((self.M * t + self.C) ** -2.0)

    def eps_dot(self, t):
        t = _check_time(t, self.t0)
        return _out(-2.0 * self.M * (self.M * t + self.C) ** -3.0)

    def inv_sqrt_eps_slope(self, t):
        t = _check_time(t, self.t0)
        return _out(np.full_like(t, self.M))

    def spec(self) -> str:
        return f"rational:M={self.M!r},C={self.C!r}"


@dataclass(frozen=True)
class ConstantSchedule:
    c: float = 1.0
    t0: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"constant schedule needs c > 0, got {self.c}")
        if not self.t0 > 0:
            raise ValueError(f"t0 must be positive, got {self.t0}")

    @property
    def family(self) -> str:
        return "constant"

    def eps(self, t):
        t = _check_time(t, self.t0)
        return _out(np.full_like(t, self.c))

    def eps_dot(self, t):
        t = _check_time(t, self.t0)
        return _out(np.zeros_like(t))

    def inv_sqrt_eps_slope(self, t):
        t = _check_time(t, self.t0)
        return _out(np.zeros_like(t))

    def spec(self) -> str:
        return f"const:c={self.c!r}"


Schedule = PowerSchedule | RationalSchedule | ConstantSchedule


def parse_schedule(spec: str, t0: float = 1.0) -> Schedule:
    """Parse ``power:c=1,r=2``, ``rational:M=0.2,C=0`` or ``const:c=1``."""
    head, _, body = spec.strip().partition(":")
    params = {}
    for item in filter(None, (s.strip() for s in body.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValueError(f"bad schedule parameter {item!r} in {spec!r}")
        try:
            params[key.strip()] = float(val)
        except ValueError:
            raise ValueError(f"non-numeric schedule parameter {item!r} in {spec!r}") from None
    allowed = {"power": {"c", "r"}, "rational": {"M", "C"}, "const": {"c"}}
    if head not in allowed:
        raise ValueError(f"unknown schedule family {head!r} in {spec!r}")
    extra = set(params) - allowed[head]
    if extra:
        raise ValueError(f"unknown {head} parameter(s) {sorted(extra)} in {spec!r}")
    if head == "power":
        return PowerSchedule(params.get("c", 1.0), params.get("r", 2.0), t0)
    if head == "rational":
        return RationalSchedule(params.get("M", 1.0), params.get("C", 0.0), t0)
    return ConstantSchedule(params.get("c", 1.0), t0)


def admissible_K_range(delta: float) -> tuple[float, float]:
    """Open interval of Lyapunov parameters K allowed for damping scale delta."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if delta <= 2:
        return (delta / 2, delta)
    return ((delta + math.sqrt(delta * delta - 4)) / 2, delta)


@dataclass(frozen=True)
class Certificate:
    delta: float
    K: float
    t1: float = 1.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")

    @property
    def admissible(self) -> bool:
        lo, hi = admissible_K_range(self.delta)
        return lo < self.K < hi

    @property
    def slope_bound(self) -> float:
        """min(2K - delta, delta - K)."""
        return min(2 * self.K - self.delta, self.delta - self.K)


class CDVerdict(NamedTuple):
    satisfied: bool
    margin: float
    nonincreasing: bool


def cd_check(schedule: Schedule, cert: Certificate, horizon: float, grid_size: int = 256) -> CDVerdict:
    """Check the controlled-decay condition on a log-spaced grid over [t1, horizon].

    The shipped families have monotone ``(1/sqrt(eps))'`` so the grid check is
    exact up to that monotonicity.
    """
    if not cert.admissible:
        lo, hi = admissible_K_range(cert.delta)
        raise ValueError(f"K = {cert.K} outside admissible range ({lo:.6g}, {hi:.6g}) for delta = {cert.delta}")
    if not horizon > cert.t1:
        raise ValueError("horizon must exceed t1")
    t = np.geomspace(cert.t1, horizon, grid_size)
    slope = schedule.inv_sqrt_eps_slope(t)
    e = schedule.eps(t)
    nonincreasing = bool(np.all(schedule.eps_dot(t) <= 0) and np.all(np.diff(e) <= 0))
    margin = float(np.min(cert.slope_bound - slope))
    return CDVerdict(nonincreasing and margin >= 0, margin, nonincreasing)


def select_K(schedule: Schedule, delta: float, horizon: float, t1: float | None = None, n: int = 64) -> float:
    """Midpoint of the K values (of n equispaced candidates) passing cd_check."""
    lo, hi = admissible_K_range(delta)
    t1 = schedule.t0 if t1 is None else t1
    cands = lo + (hi - lo) * np.arange(1, n + 1) / (n + 1)
    ok = [K for K in cands if cd_check(schedule, Certificate(delta, K, t1), horizon).satisfied]
    if not ok:
        raise ValueError(f"no admissible K satisfies the controlled-decay condition for delta = {delta}")
    return float((ok[0] + ok[-1]) / 2)


def mu(schedule: Schedule, cert: Certificate, t):
    """-eps'(t) / (2 eps(t)) + (delta - K) sqrt(eps(t))."""
    e = schedule.eps(t)
    return _out(-np.asarray(schedule.eps_dot(t)) / (2 * np.asarray(e)) + (cert.delta - cert.K) * np.sqrt(e))


def log_big_m(schedule: Schedule, cert: Certificate, t):
    """log of the integrating factor, normalised to 0 at t1."""
    t = _check_time(t, cert.t1)
    t1, d = cert.t1, cert.delta - cert.K
    if isinstance(schedule, RationalSchedule):
        M, C = schedule.M, schedule.C
        out = (M + d) / M * np.log((M * t + C) / (M * t1 + C))
    elif isinstance(schedule, PowerSchedule):
        r, sc = schedule.r, math.sqrt(schedule.c)
        if r == 2:
            out = (1 + d * sc) * np.log(t / t1)
        else:
            p = 1 - r / 2
            out = 0.5 * r * np.log(t / t1) + d * sc / p * (t**p - t1**p)
    elif isinstance(schedule, ConstantSchedule):
        out = d * math.sqrt(schedule.c) * (t - t1)
    else:
        return log_big_m_quad(schedule, cert, t)
    return _out(out)


def log_big_m_quad(schedule: Schedule, cert: Certificate, t):
    """Same as log_big_m but by adaptive quadrature of mu."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.array([integrate.quad(lambda s: mu(schedule, cert, s), cert.t1, ti, limit=200, epsabs=0, epsrel=1e-12)[0] for ti in ts])
    return _out(out.reshape(np.shape(t)))


def big_m(schedule: Schedule, cert: Certificate, t):
    """exp(int_{t1}^t mu(s) ds)."""
    return _out(np.exp(log_big_m(schedule, cert, t)))


def eps_floor(schedule: Schedule, cert: Certificate, t):
    """1 / (M1 t + C1)^2, the lower bound any (CD)_K schedule stays above."""
    m1 = cert.slope_bound
    c1 = 1 / math.sqrt(schedule.eps(cert.t1)) - m1 * cert.t1
    return _out((m1 * np.asarray(t, dtype=float) + c1) ** -2.0)


def _weighted_eps_integral(schedule: Schedule, cert: Certificate, t: float) -> float:
    """int_{t1}^t eps^{3/2}(s) M(s) ds / M(t)."""
    t1, d = cert.t1, cert.delta - cert.K
    if t == t1:
        return 0.0
    if isinstance(schedule, RationalSchedule):
        M, C = schedule.M, schedule.C
        q = (-M + d) / M
        if q != 0:
            u, u1 = M * t + C, M * t1 + C
            # (u1^-p) int (Ms+C)^(p-3) ds / (u/u1)^p with p = q + 2
            return (u ** q - u1 ** q) / (M * q) * u ** -(q + 2)
    elif isinstance(schedule, PowerSchedule) and schedule.r == 2:
        c = schedule.c
        q = 1 + d * math.sqrt(c)
        if q != 2:
            return c**1.5 * (t ** (q - 2) - t1 ** (q - 2)) / (q - 2) * t**-q
    lt = log_big_m(schedule, cert, t)

    def integrand(s):
        val = schedule.eps(s) ** 1.5 * math.exp(log_big_m(schedule, cert, s) - lt)
        if not math.isfinite(val):
            raise FloatingPointError(f"non-finite integrand at s = {s}")
        return val

    val, _ = integrate.quad(integrand, t1, t, limit=500, epsabs=0, epsrel=1e-10)
    return val


def rate_bound(schedule: Schedule, cert: Certificate, x_star_norm: float, E_t1: float, t):
    """Upper bound on f(x(t)) - min f from the Lyapunov analysis.

    ``E_t1`` is the Lyapunov energy of the trajectory at t1.  Closed forms
    are used for the rational and r = 2 power families, quadrature
    otherwise.
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    _check_time(ts, cert.t1)
    out = np.empty_like(ts)
    for i, ti in enumerate(ts):
        w = _weighted_eps_integral(schedule, cert, ti)
        out[i] = 0.5 * cert.K * x_star_norm**2 * w + E_t1 * math.exp(-log_big_m(schedule, cert, ti))
    return _out(out.reshape(np.shape(t)))
