"""Inertial proximal algorithms with Tikhonov regularization (IPATRE, IPATRE-NS)
and the Moreau envelope calculus they rely on.

One IPATRE step, with alpha_k = 1 - alpha/k:

    y_k     = x_k + alpha_k (x_k - x_{k-1})
    x_{k+1} = prox_f(y_k - (c/k^2) x_k)

IPATRE-NS runs the same recursion on the Moreau envelope f_lambda, with the
envelope's prox written through prox_{(lambda+1) f}.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .objectives import Objective


@dataclass(frozen=True)
class IpatreParams:
    alpha: float
    c: float
    iters: int
    x0: np.ndarray
    x1: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.iters < 2:
            raise ValueError(f"iters must be >= 2, got {self.iters}")
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))
        x1 = self.x0 if self.x1 is None else np.atleast_1d(np.asarray(self.x1, dtype=float))
        if x1.shape != self.x0.shape:
            raise ValueError("x0 and x1 must have the same shape")
        object.__setattr__(self, "x1", x1)


@dataclass
class IterateLog:
    """Per-iterate records for x_1, ..., x_N (row i holds k = i + 1).

    ``resid_norm`` is |grad f(x_k)| for smooth objectives; for IPATRE on a
    nonsmooth f it is the prox residual of the step that produced x_k, and
    for IPATRE-NS it is |x_k - prox_{lambda f}(x_k)|.
    """

    algorithm: str
    params: dict
    k: np.ndarray
    x: np.ndarray
    f_gap: np.ndarray
    step_norm: np.ndarray
    resid_norm: np.ndarray
    dist_min_norm: np.ndarray
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return self.k.size

    def decimation(self, max_rows: int = 10_000) -> int:
        return max(1, math.ceil(self.k.size / max_rows))

    def to_csv(self, path, every: Optional[int] = None) -> int:
        """Write every ``every``-th record; returns the number of rows written."""
        every = self.decimation() if every is None else every
        n = self.x.shape[1]
        header = ["k", *(f"x{i + 1}" for i in range(n)), "f_gap", "step_norm", "resid_norm", "dist_min_norm"]
        idx = np.arange(0, self.k.size, every)
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i in idx:
                row = [self.k[i], *self.x[i], self.f_gap[i], self.step_norm[i], self.resid_norm[i], self.dist_min_norm[i]]
                w.writerow([str(int(row[0]))] + [format(float(v), ".17g") for v in row[1:]])
        return idx.size


def ipatre_step(obj: Objective, x_k, x_km1, k: int, params: IpatreParams):
    """x_{k+1} from (x_k, x_{k-1}); alpha_k is used as is, even when negative."""
    if k < 1:
        raise ValueError("k starts at 1")
    if obj.prox is None:
        raise ValueError(f"objective {obj.name!r} has no proximal map")
    y = x_k + (1.0 - params.alpha / k) * (x_k - x_km1)
    return obj.prox(1.0, y - (params.c / (k * k)) * x_k)


def _run(obj: Objective, params: IpatreParams, update, gap_and_resid, algorithm: str, extra_params: dict) -> IterateLog:
    n = params.x0.size
    if n != obj.dim:
        raise ValueError(f"x0 has dimension {n}, objective has {obj.dim}")
    N = params.iters
    xs = np.empty((N, n))
    xs[0] = params.x1
    x_prev, x = params.x0, params.x1
    resid = np.full(N, np.nan)
    for k in range(1, N):
        y = x + (1.0 - params.alpha / k) * (x - x_prev)
        z = y - (params.c / (k * k)) * x
        x_next = update(z)
        resid[k] = np.linalg.norm(z - x_next)
        xs[k] = x_next
        x_prev, x = x, x_next

    steps = np.linalg.norm(np.diff(np.vstack([params.x0, xs]), axis=0), axis=1)
    gaps, resid = gap_and_resid(xs, resid)
    xstar = obj.known_min_norm_solution
    dist = np.full(N, np.nan) if xstar is None else np.linalg.norm(xs - xstar, axis=1)
    p = {"alpha": params.alpha, "c": params.c, "iters": N, **extra_params}
    return IterateLog(algorithm, p, np.arange(1, N + 1), xs, gaps, steps, resid, dist)


def ipatre_run(obj: Objective, params: IpatreParams) -> IterateLog:
    """Run IPATRE for iterates x_1..x_iters."""
    if obj.prox is None:
        raise ValueError(f"objective {obj.name!r} has no proximal map")
    fmin = obj.known_min_value

    def gap_and_resid(xs, prox_resid):
        gaps = np.array([obj.value(x) for x in xs]) - fmin if fmin is not None else np.full(len(xs), np.nan)
        if obj.grad is not None:
            resid = np.linalg.norm(np.array([obj.grad(x) for x in xs]), axis=1)
        else:
            resid = prox_resid
        return gaps, resid

    return _run(obj, params, lambda z: obj.prox(1.0, z), gap_and_resid, "ipatre", {})


def ipatre_ns_run(obj: Objective, lam: float, params: IpatreParams) -> IterateLog:
    """Run IPATRE-NS; gaps are measured at prox_{lam f}(x_k)."""
    if obj.prox is None:
        raise ValueError(f"objective {obj.name!r} has no proximal map")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    fmin = obj.known_min_value
    a, b = lam / (1.0 + lam), 1.0 / (1.0 + lam)

    def gap_and_resid(xs, _):
        ps = np.array([obj.prox(lam, x) for x in xs])
        gaps = np.array([obj.value(p) for p in ps]) - fmin if fmin is not None else np.full(len(xs), np.nan)
        return gaps, np.linalg.norm(xs - ps, axis=1)

    return _run(obj, params, lambda z: a * z + b * obj.prox(lam + 1.0, z), gap_and_resid, "ipatre-ns", {"lambda": lam})


def moreau_value(obj: Objective, lam: float, x) -> float:
    """f_lam(x) = f(p) + |x - p|^2 / (2 lam), p = prox_{lam f}(x)."""
    x = np.asarray(x, dtype=float)
    p = obj.proximal(lam, x)
    d = x - p
    return obj.value(p) + float(np.vdot(d, d)) / (2 * lam)


def moreau_grad(obj: Objective, lam: float, x):
    """(x - prox_{lam f}(x)) / lam."""
    x = np.asarray(x, dtype=float)
    return (x - obj.proximal(lam, x)) / lam


def prox_of_envelope(obj: Objective, lam: float, theta: float, x):
    """prox_{theta f_lam}(x) = (lam x + theta prox_{(lam+theta) f}(x)) / (lam + theta)."""
    if not (lam > 0 and theta > 0):
        raise ValueError("lambda and theta must be positive")
    x = np.asarray(x, dtype=float)
    s = lam + theta
    return (lam / s) * x + (theta / s) * obj.proximal(s, x)


def moreau_envelope(obj: Objective, lam: float) -> Objective:
    """The envelope f_lam as a smooth objective with the same minimizers."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return Objective(
        name=f"moreau({obj.name},{lam})",
        dim=obj.dim,
        value=lambda x: moreau_value(obj, lam, x),
        grad=lambda x: moreau_grad(obj, lam, x),
        prox=lambda theta, x: prox_of_envelope(obj, lam, theta, x),
        known_min_value=obj.known_min_value,
        known_min_norm_solution=obj.known_min_norm_solution,
    )
