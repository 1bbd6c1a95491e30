"""Second-order dynamics written as first-order systems, and their trajectories.

Three dynamics share the template

    x'' + damping(t) x' + grad f(x) + eps(t) (x - anchor) = 0

* :class:`TRIGS`      damping = delta sqrt(eps(t)), Tikhonov eps(t)
* :class:`AVD`        damping = alpha / t, optional Tikhonov schedule
* :class:`HeavyBall`  damping = 2 sqrt(mu), no Tikhonov term
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .integrator import IntegratorStats, dopri5
from .objectives import Objective
from .schedules import Schedule


def _need_grad(objective: Objective):
    if objective.grad is None:
        raise ValueError(f"objective {objective.name!r} has no gradient; continuous dynamics need one")


@dataclass(frozen=True)
class TRIGS:
    objective: Objective
    delta: float
    schedule: Schedule
    anchor: Optional[np.ndarray] = None

    kind = "trigs"

    def __post_init__(self):
        _need_grad(self.objective)
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")

    @property
    def t0(self) -> float:
        return self.schedule.t0

    def eps(self, t):
        return self.schedule.eps(t)

    def damping(self, t):
        return self.delta * np.sqrt(self.schedule.eps(t))

    def coefficients(self, t: float) -> tuple[float, float]:
        """(damping, eps) at a scalar time."""
        e = self.schedule.eps(t)
        return self.delta * math.sqrt(e), e


@dataclass(frozen=True)
class AVD:
    """x'' + (alpha/t) x' + grad f(x) + eps(t) x = 0; eps = 0 when schedule is None."""

    objective: Objective
    alpha: float
    schedule: Optional[Schedule] = None
    t0: float = 1.0

    kind = "avd"
    anchor = None

    def __post_init__(self):
        _need_grad(self.objective)
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.t0 > 0:
            raise ValueError("t0 must be positive (alpha/t is singular at 0)")

    def eps(self, t):
        if self.schedule is None:
            return 0.0 * np.asarray(t, dtype=float)
        return self.schedule.eps(t)

    def damping(self, t):
        return self.alpha / np.asarray(t, dtype=float)

    def coefficients(self, t: float) -> tuple[float, float]:
        return self.alpha / t, (0.0 if self.schedule is None else self.schedule.eps(t))


@dataclass(frozen=True)
class HeavyBall:
    """x'' + 2 sqrt(mu) x' + grad f(x) = 0 for a mu-strongly convex f."""

    objective: Objective
    mu: float
    t0: float = 1.0

    kind = "heavy_ball"
    anchor = None

    def __post_init__(self):
        _need_grad(self.objective)
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        sc = self.objective.strong_convexity
        if not math.isclose(self.mu, sc, rel_tol=1e-8):
            raise ValueError(f"mu = {self.mu} differs from the objective's strong convexity {sc}")

    def eps(self, t):
        return 0.0 * np.asarray(t, dtype=float)

    def damping(self, t):
        return 2.0 * math.sqrt(self.mu) + 0.0 * np.asarray(t, dtype=float)

    def coefficients(self, t: float) -> tuple[float, float]:
        return 2.0 * math.sqrt(self.mu), 0.0


Dynamics = TRIGS | AVD | HeavyBall


def vector_field(spec: Dynamics, t: float, x, v):
    """(x', v') of the first-order system at time t."""
    if t < spec.t0:
        raise ValueError(f"t = {t} precedes t0 = {spec.t0}")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    acc = -spec.damping(t) * v - spec.objective.gradient(x)
    e = spec.eps(t)
    if e:
        acc = acc - e * (x if spec.anchor is None else x - spec.anchor)
    return v, acc


@dataclass
class Trajectory:
    """Sampled solution of one dynamic: rows of ``x`` and ``v`` match ``t``."""

    spec: Dynamics
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    stats: IntegratorStats = field(default_factory=IntegratorStats)

    def __post_init__(self):
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.v))):
            raise ValueError("trajectory contains non-finite states")

    @property
    def objective(self) -> Objective:
        return self.spec.objective

    def values(self) -> np.ndarray:
        f = self.objective.value
        return np.array([f(xi) for xi in self.x])

    def f_gap(self) -> np.ndarray:
        fmin = self.objective.known_min_value
        if fmin is None:
            return np.full(self.t.size, np.nan)
        return self.values() - fmin

    def dist(self, point=None) -> np.ndarray:
        if point is None:
            point = self.objective.known_min_norm_solution
        if point is None:
            return np.full(self.t.size, np.nan)
        return np.linalg.norm(self.x - np.asarray(point), axis=1)

    def speed(self) -> np.ndarray:
        return np.linalg.norm(self.v, axis=1)

    def grad_norm(self) -> np.ndarray:
        g = self.objective.grad
        return np.array([np.linalg.norm(g(xi)) for xi in self.x])

    def eps(self) -> np.ndarray:
        return np.asarray(self.spec.eps(self.t), dtype=float) * np.ones(self.t.size)

    def to_csv(self, path) -> None:
        n = self.x.shape[1]
        header = ["t", *(f"x{i + 1}" for i in range(n)), *(f"v{i + 1}" for i in range(n)),
                  "f_gap", "dist_min_norm", "speed", "grad_norm", "eps", "W"]
        cols = [self.t[:, None], self.x, self.v, self.f_gap()[:, None], self.dist()[:, None],
                self.speed()[:, None], self.grad_norm()[:, None], self.eps()[:, None],
                energy_W(self.spec, self).W[:, None]]
        table = np.hstack(cols)
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in table:
                w.writerow([format(float(v), ".17g") for v in row])


def integrate(
    spec: Dynamics,
    x0,
    v0=None,
    t_end: float = 100.0,
    t0: Optional[float] = None,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    samples=200,
    max_step: Optional[float] = None,
) -> Trajectory:
    """Integrate ``spec`` from (x0, v0) on [t0, t_end].

    ``samples`` is either a count (log-spaced grid) or an explicit sorted
    array of sample times.  The default max step is (t_end - t0) / 50.
    """
    t0 = spec.t0 if t0 is None else float(t0)
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    if t0 < spec.t0:
        raise ValueError(f"t0 = {t0} precedes the schedule start {spec.t0}")
    if not t_end > t0:
        raise ValueError("t_end must exceed t0")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = spec.objective.dim
    if x0.shape != (n,):
        raise ValueError(f"x0 must have shape ({n},)")
    v0 = np.zeros(n) if v0 is None else np.atleast_1d(np.asarray(v0, dtype=float))
    if v0.shape != (n,):
        raise ValueError(f"v0 must have shape ({n},)")
    if np.ndim(samples) == 0:
        ts = np.geomspace(t0, t_end, int(samples))
        ts[0], ts[-1] = t0, t_end
    else:
        ts = np.asarray(samples, dtype=float)
    if max_step is None:
        max_step = (t_end - t0) / 50

    grad = spec.objective.grad
    coefficients, anchor = spec.coefficients, spec.anchor

    def fun(t, y):
        x, v = y[:n], y[n:]
        damp, e = coefficients(t)
        acc = -damp * v - grad(x)
        if e:
            acc -= e * (x if anchor is None else x - anchor)
        return np.concatenate((v, acc))

    ys, stats = dopri5(fun, t0, np.concatenate((x0, v0)), t_end, ts, rtol=rtol, atol=atol, max_step=max_step)
    return Trajectory(spec, ts, ys[:, :n], ys[:, n:], stats)


@dataclass
class EnergyReport:
    W: np.ndarray
    max_increase: float


def energy_W(spec: Dynamics, traj: Trajectory) -> EnergyReport:
    """W(t) = |x'|^2/2 + f(x) + eps(t) |x - anchor|^2 / 2 and its worst increase."""
    xs = traj.x if spec.anchor is None else traj.x - spec.anchor
    W = 0.5 * np.sum(traj.v**2, axis=1) + traj.values() + 0.5 * traj.eps() * np.sum(xs**2, axis=1)
    inc = float(np.max(np.diff(W), initial=0.0))
    return EnergyReport(W, max(inc, 0.0))
