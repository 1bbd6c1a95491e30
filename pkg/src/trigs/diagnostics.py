"""Lyapunov energies, distance statistics and convergence-rate fits."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .continuous import Trajectory
from .discrete import IterateLog
from .objectives import Objective
from .schedules import Certificate, Schedule, mu


@dataclass
class RateReport:
    quantity: str
    slope: float
    intercept: float
    window: tuple[float, float]
    rms: float
    n_points: int
    n_dropped: int = 0
    target_slope: Optional[float] = None
    margin: float = 0.0
    scale: str = "loglog"

    @property
    def passed(self) -> Optional[bool]:
        """slope <= target + margin, i.e. decay at least as fast as the target."""
        if self.target_slope is None:
            return None
        return bool(self.slope <= self.target_slope + self.margin)

    def to_json(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        d["pass"] = self.passed
        return d


def rate_fit(
    t,
    y,
    window_fraction: float = 0.5,
    log_correction: bool = False,
    quantity: str = "y",
    target_slope: Optional[float] = None,
    margin: float = 0.0,
    scale: str = "loglog",
    min_points: int = 10,
) -> RateReport:
    """Least-squares line through (log t, log y) on the trailing window.

    The window is the last ``window_fraction`` of the log t range.  With
    ``log_correction`` y is divided by ln t first.  ``scale="semilog"`` fits
    log y against t, i.e. an exponential rate.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("t and y must be 1-D arrays of equal length")
    if not 0 < window_fraction <= 1:
        raise ValueError("window_fraction must lie in (0, 1]")
    if scale == "loglog":
        if np.any(t <= 0):
            raise ValueError("log-log fit needs positive abscissae")
        u = np.log(t)
    elif scale == "semilog":
        u = t.copy()
    else:
        raise ValueError(f"unknown scale {scale!r}")
    lo = u[-1] - window_fraction * (u[-1] - u[0])
    sel = u >= lo - 1e-12 * max(1.0, abs(lo))
    tw, yw, uw = t[sel], y[sel], u[sel]
    if log_correction:
        with np.errstate(divide="ignore", invalid="ignore"):
            yw = yw / np.log(tw)
    ok = np.isfinite(yw) & (yw > 0) & np.isfinite(uw)
    dropped = int(sel.sum() - ok.sum())
    if ok.sum() < min_points:
        raise ValueError(f"{quantity}: only {int(ok.sum())} positive values in the fit window ({dropped} nonpositive)")
    uw, lw = uw[ok], np.log(yw[ok])
    A = np.vstack([uw, np.ones_like(uw)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, lw, rcond=None)
    rms = float(np.sqrt(np.mean((A @ np.array([slope, intercept]) - lw) ** 2)))
    return RateReport(quantity, float(slope), float(intercept), (float(tw[ok][0]), float(tw[ok][-1])),
                      rms, int(ok.sum()), dropped, target_slope, margin, scale)


def min_norm_gap(xs, x_star, t=None, tail_from: Optional[float] = None) -> tuple[float, float]:
    """(distance at the last sample, minimum distance over the tail).

    The tail is ``t >= tail_from`` when both are given, else the trailing half
    of the samples.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    d = np.linalg.norm(xs - np.asarray(x_star, dtype=float), axis=1)
    if tail_from is not None and t is not None:
        tail = d[np.asarray(t) >= tail_from]
    else:
        tail = d[d.size // 2 :]
    return float(d[-1]), float(tail.min())


def ball_regime(xs, x_star, tail_fraction: float = 0.5) -> str:
    """Where the tail sits relative to the ball B(0, |x*|): inside, outside or crossing."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    r = float(np.linalg.norm(x_star))
    norms = np.linalg.norm(xs[int(len(xs) * (1 - tail_fraction)) :], axis=1)
    if np.all(norms < r):
        return "inside"
    if np.all(norms >= r):
        return "outside"
    return "crossing"


def envelope_nonincreasing(values, n_blocks: int = 10, jitter: float = 0.05, atol: float = 0.0) -> bool:
    """Block maxima never exceed (1 + jitter) times any earlier block maximum.

    Oscillating sequences are judged by their upper envelope.  Values below
    ``atol`` count as zero.
    """
    v = np.asarray(values, dtype=float)
    v = np.where(v < atol, 0.0, v)
    blocks = [b for b in np.array_split(v, n_blocks) if b.size]
    maxima = np.array([b.max() for b in blocks])
    running_min = np.minimum.accumulate(maxima)
    return bool(np.all(maxima[1:] <= (1 + jitter) * running_min[:-1]))


def partial_sum_growth(terms, tail_start: int) -> float:
    """Relative growth of the partial sums over terms[tail_start:]; 0 when the sum is 0."""
    terms = np.asarray(terms, dtype=float)
    total = float(np.sum(terms))
    if total == 0:
        return 0.0
    return float(np.sum(terms[tail_start:])) / total


@dataclass
class LyapunovSeries:
    t: np.ndarray
    energy: np.ndarray
    gronwall: np.ndarray
    K: float

    @property
    def max_gronwall(self) -> float:
        return float(np.max(self.gronwall)) if self.gronwall.size else -math.inf


def _ground_truth(obj: Objective, x_star):
    if obj.known_min_value is None:
        raise ValueError("the Lyapunov energy needs the minimum value of f")
    if x_star is None:
        x_star = obj.known_min_norm_solution
    if x_star is None:
        raise ValueError("the Lyapunov energy needs the minimum-norm solution")
    return obj.known_min_value, np.asarray(x_star, dtype=float)


def _centered(t, e):
    return (e[2:] - e[:-2]) / (t[2:] - t[:-2])


def lyapunov_general(traj: Trajectory, obj: Objective, schedule: Schedule, cert: Certificate, x_star=None) -> LyapunovSeries:
    """E(t) = f(x) - f* + eps |x|^2 / 2 + |K sqrt(eps) (x - x*) + x'|^2 / 2.

    ``gronwall`` holds dE/dt + mu E - (K |x*|^2 / 2) eps^{3/2} on interior
    samples, with dE/dt from centered differences; the exact flow keeps it
    nonpositive.
    """
    fmin, xs = _ground_truth(obj, x_star)
    t = traj.t
    e = np.asarray(schedule.eps(t), dtype=float)
    se = np.sqrt(e)
    w = cert.K * se[:, None] * (traj.x - xs) + traj.v
    E = (traj.values() - fmin) + 0.5 * e * np.sum(traj.x**2, axis=1) + 0.5 * np.sum(w**2, axis=1)
    rhs = 0.5 * cert.K * float(xs @ xs) * e**1.5
    g = _centered(t, E) + mu(schedule, cert, t[1:-1]) * E[1:-1] - rhs[1:-1]
    return LyapunovSeries(t, E, g, cert.K)


def select_critical_K(alpha: float, c: float, n: int = 64) -> float:
    """K for the eps = c/t^2 Lyapunov function.

    For alpha > 3: midpoint of the candidates in ((alpha+1)/2, alpha-1) with
    (alpha - K - 1) K <= c.  For alpha = 3 the only choice is K = 2.
    """
    if alpha == 3:
        return 2.0
    if alpha < 3:
        raise ValueError(f"no admissible K for alpha = {alpha} < 3")
    lo, hi = (alpha + 1) / 2, alpha - 1
    cands = lo + (hi - lo) * np.arange(1, n + 1) / (n + 1)
    ok = cands[(alpha - cands - 1) * cands**2 - cands * c <= 0]
    if ok.size == 0:
        raise ValueError(f"no feasible K for alpha = {alpha}, c = {c}")
    return float((ok[0] + ok[-1]) / 2)


@dataclass
class CriticalLyapunov:
    t: np.ndarray
    energy: np.ndarray
    normalized: np.ndarray
    K: float

    def tail_sup(self, fraction: float = 0.5) -> float:
        return float(np.max(self.normalized[int(self.normalized.size * (1 - fraction)) :]))


def lyapunov_critical(traj: Trajectory, obj: Objective, alpha: float, c: float, K: Optional[float] = None, x_star=None) -> CriticalLyapunov:
    """E(t) = f - f* + c |x|^2 / (2 t^2) + |(K/t)(x - x*) + x'|^2 / 2.

    ``normalized`` is t^2 E(t) for alpha > 3 and t^2 E(t) / ln t for alpha = 3.
    """
    fmin, xs = _ground_truth(obj, x_star)
    if K is None:
        K = select_critical_K(alpha, c)
    elif alpha > 3 and not ((alpha + 1) / 2 < K < alpha - 1 and (alpha - K - 1) * K * K - K * c <= 0):
        raise ValueError(f"K = {K} is not feasible for alpha = {alpha}, c = {c}")
    t = traj.t
    w = (K / t)[:, None] * (traj.x - xs) + traj.v
    E = (traj.values() - fmin) + c / (2 * t**2) * np.sum(traj.x**2, axis=1) + 0.5 * np.sum(w**2, axis=1)
    if alpha == 3:
        with np.errstate(divide="ignore"):
            norm = np.where(t > 1, t**2 * E / np.log(np.where(t > 1, t, 2.0)), np.nan)
    else:
        norm = t**2 * E
    return CriticalLyapunov(t, E, norm, K)


def discrete_energy(log: IterateLog, obj: Objective, a: float, r: float, alpha: float, c: float, x_star=None) -> np.ndarray:
    """E_k for k = 2..N, aligned so that entry j belongs to k = j + 2.

    E_k = |a_{k-1}(x_{k-1} - x*) + b_{k-1}(x_k - x_{k-1} + grad f(x_k))|^2 + d_{k-1} |x_{k-1}|^2
    with a_k = a k^{r-1}, b_k = k^r, d_{k-1} = alpha_k b_k^2 c_k / 2, c_k = c/k^2.
    """
    if not 2 < a < alpha - 1:
        raise ValueError(f"need 2 < a < alpha - 1, got a = {a}, alpha = {alpha}")
    if not 0.5 <= r <= 1:
        raise ValueError(f"need r in [1/2, 1], got {r}")
    if obj.grad is None:
        raise ValueError("discrete energy needs a gradient")
    if x_star is None:
        x_star = obj.known_min_norm_solution
    if x_star is None:
        raise ValueError("discrete energy needs the minimum-norm solution")
    x_star = np.asarray(x_star, dtype=float)
    k = log.k[1:].astype(float)
    x_k, x_km1 = log.x[1:], log.x[:-1]
    grads = np.array([obj.grad(x) for x in x_k])
    km1 = k - 1
    a_km1 = a * km1 ** (r - 1)
    b_km1 = km1**r
    d_km1 = 0.5 * (1 - alpha / k) * k ** (2 * r) * c / k**2
    v = a_km1[:, None] * (x_km1 - x_star) + b_km1[:, None] * (x_k - x_km1 + grads)
    return np.sum(v**2, axis=1) + d_km1 * np.sum(x_km1**2, axis=1)


def exp_rate(t, y, window_fraction: float = 0.5, quantity: str = "y", target_slope=None, margin: float = 0.0) -> RateReport:
    """Slope of log y against t on the trailing window."""
    return rate_fit(t, y, window_fraction, quantity=quantity, target_slope=target_slope, margin=margin, scale="semilog")


def summarize(values: Sequence[float]) -> dict:
    v = np.asarray(values, dtype=float)
    return {"min": float(np.min(v)), "max": float(np.max(v)), "last": float(v[-1])}
