"""Dormand-Prince 5(4) integrator with PI step control and dense output.

Coefficients, the 4th-order continuous extension and the PI controller
constants follow Hairer, Norsett & Wanner, *Solving ODEs I*, the DOPRI5 code.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
D1, D3, D4, D5, D6, D7 = (
    -12715105075 / 11282082432,
    87487479700 / 32700410799,
    -10690763975 / 1880347072,
    701980252875 / 199316789632,
    -1453857185 / 822651844,
    69997945 / 29380423,
)

# PI controller
BETA = 0.04
EXPO1 = 0.2 - BETA * 0.75
SAFE = 0.9
FAC_MIN, FAC_MAX = 0.2, 10.0


class IntegrationError(RuntimeError):
    """Step-size underflow or a non-finite state; carries the last good state."""

    def __init__(self, msg: str, t: float, y: np.ndarray):
        super().__init__(f"{msg} at t = {t!r}")
        self.t = t
        self.y = y


@dataclass
class IntegratorStats:
    steps: int = 0
    rejected: int = 0
    evaluations: int = 0
    rtol: float = 0.0
    atol: float = 0.0


def _initial_step(fun, t0, y0, f0, direction_span, rtol, atol, max_step):
    sc = atol + rtol * np.abs(y0)
    d0 = math.sqrt(np.mean((y0 / sc) ** 2))
    d1 = math.sqrt(np.mean((f0 / sc) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, max_step, direction_span)
    f1 = fun(t0 + h0, y0 + h0 * f0)
    d2 = math.sqrt(np.mean(((f1 - f0) / sc) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, max_step, direction_span)


def dopri5(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0,
    t_end: float,
    t_eval,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    max_step: float = math.inf,
    h_min: float = 1e-14,
):
    """Integrate y' = fun(t, y) from t0 to t_end, returning states at ``t_eval``.

    ``t_eval`` must be sorted within [t0, t_end].  Returns ``(ys, stats)``
    with ``ys`` of shape (len(t_eval), len(y0)).
    """
    y = np.array(y0, dtype=float)
    t_eval = np.asarray(t_eval, dtype=float)
    if not t_end > t0:
        raise ValueError("t_end must exceed t0")
    if not (rtol > 0 and atol >= 0):
        raise ValueError(f"need rtol > 0 and atol >= 0, got rtol = {rtol}, atol = {atol}")
    if t_eval.size and (t_eval[0] < t0 or t_eval[-1] > t_end or np.any(np.diff(t_eval) < 0)):
        raise ValueError("t_eval must be sorted inside [t0, t_end]")
    out = np.empty((t_eval.size, y.size))
    stats = IntegratorStats(rtol=rtol, atol=atol)

    t = float(t0)
    k1 = fun(t, y)
    stats.evaluations += 1
    h = _initial_step(fun, t, y, k1, t_end - t, rtol, atol, max_step)
    stats.evaluations += 1
    facold = 1e-4
    i_out = 0
    while i_out < t_eval.size and t_eval[i_out] <= t:
        out[i_out] = y
        i_out += 1

    reject = False
    while t < t_end:
        if h < h_min * max(1.0, abs(t)):
            raise IntegrationError("step size underflow", t, y.copy())
        last = t + h >= t_end
        if last:
            h = t_end - t
        k2 = fun(t + C2 * h, y + h * (A21 * k1))
        k3 = fun(t + C3 * h, y + h * (A31 * k1 + A32 * k2))
        k4 = fun(t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = fun(t + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = fun(t + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        y_new = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
        k7 = fun(t + h, y_new)
        stats.evaluations += 6

        err_vec = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = math.sqrt(float(np.mean((err_vec / sc) ** 2)))
        if not math.isfinite(err):
            if h * FAC_MIN < h_min * max(1.0, abs(t)):
                raise IntegrationError("non-finite state", t, y.copy())
            h *= FAC_MIN
            reject = True
            stats.rejected += 1
            continue

        fac11 = err**EXPO1
        fac = fac11 / facold**BETA
        fac = max(1 / FAC_MAX, min(1 / FAC_MIN, fac / SAFE))
        h_new = h / fac

        if err <= 1.0:
            facold = max(err, 1e-4)
            stats.steps += 1
            t_new = t_end if last else t + h
            if i_out < t_eval.size and t_eval[i_out] <= t_new:
                ydiff = y_new - y
                bspl = h * k1 - ydiff
                r4 = ydiff - h * k7 - bspl
                r5 = h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7)
                while i_out < t_eval.size and t_eval[i_out] <= t_new:
                    th = (t_eval[i_out] - t) / h
                    th1 = 1.0 - th
                    out[i_out] = y + th * (ydiff + th1 * (bspl + th * (r4 + th1 * r5)))
                    i_out += 1
            y, k1, t = y_new, k7, t_new
            if abs(h_new) > max_step:
                h_new = max_step
            if reject:
                h_new = min(h_new, h)
            reject = False
            h = h_new
        else:
            h = h / min(1 / FAC_MIN, fac11 / SAFE)
            reject = True
            stats.rejected += 1
    while i_out < t_eval.size:
        out[i_out] = y
        i_out += 1
    return out, stats
