"""Explicit Runge-Kutta integrators: classical RK4 and adaptive RKF45.

Both return solutions sampled exactly at the requested times; the adaptive
scheme clips its steps so that every requested time is a step endpoint
rather than interpolating between steps.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfGeoError, IntegrationFailure, StepSizeUnderflow

METHODS = ("rk4", "rkf45")

# Fehlberg 4(5) tableau
_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_A = [
    [],
    [1 / 4],
    [3 / 32, 9 / 32],
    [1932 / 2197, -7200 / 2197, 7296 / 2197],
    [439 / 216, -8.0, 3680 / 513, -845 / 4104],
    [-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40],
]
_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])


@dataclass
class OdeSolution:
    t: np.ndarray
    y: np.ndarray  # shape (len(t), size)
    method: str
    rtol: float = None
    atol: float = None
    accepted: int = 0
    rejected: int = 0
    nfev: int = 0
    meta: dict = field(default_factory=dict)


def _call(fun, t, y, counter):
    counter[0] += 1
    try:
        out = fun(t, y)
    except ConfGeoError as exc:
        if getattr(exc, "t", None) is None:
            exc.t = t
            exc.args = (f"{exc.args[0] if exc.args else exc} (at t={t:.17g})",) + exc.args[1:]
        raise
    out = np.asarray(out, dtype=float)
    if not np.all(np.isfinite(out)):
        err = IntegrationFailure(f"non-finite derivative at t={t:.17g}")
        err.t = t
        raise err
    return out


def _sample_times(t0, t1, t_eval):
    if t_eval is None:
        return np.array([t0, t1], dtype=float)
    t_eval = np.asarray(t_eval, dtype=float)
    direction = np.sign(t1 - t0)
    if np.any(np.diff(t_eval) * direction <= 0):
        raise ValueError("t_eval must be strictly monotone in the integration direction")
    if abs(t_eval[0] - t0) > 0 or abs(t_eval[-1] - t1) > 1e-14 * max(1.0, abs(t1)):
        raise ValueError("t_eval must start at t0 and end at t1")
    return t_eval


def rk4_step(fun, t, y, h, counter):
    k1 = _call(fun, t, y, counter)
    k2 = _call(fun, t + h / 2, y + h / 2 * k1, counter)
    k3 = _call(fun, t + h / 2, y + h / 2 * k2, counter)
    k4 = _call(fun, t + h, y + h * k3, counter)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def rkf45_step(fun, t, y, h, counter, f0=None):
    """One Fehlberg step; returns (y5, error estimate, derivative at t)."""
    k = [f0 if f0 is not None else _call(fun, t, y, counter)]
    for i in range(1, 6):
        yi = y + h * sum(a * kj for a, kj in zip(_A[i], k))
        k.append(_call(fun, t + _C[i] * h, yi, counter))
    k = np.array(k)
    y4 = y + h * (_B4 @ k)
    y5 = y + h * (_B5 @ k)
    return y5, y5 - y4, k[0]


def solve(fun, t0, t1, y0, method="rkf45", rtol=1e-10, atol=1e-10, t_eval=None, h=None, max_steps=1_000_000):
    """Integrate ``y' = fun(t, y)`` from ``t0`` to ``t1``.

    ``rk4`` takes fixed steps of (at most) ``h``; ``rkf45`` adapts the step to
    keep the scaled local error estimate below one.  The fifth-order
    solution of the Fehlberg pair is propagated.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    t0, t1 = float(t0), float(t1)
    if t0 == t1:
        raise ValueError("t1 must differ from t0")
    y = np.array(y0, dtype=float)
    times = _sample_times(t0, t1, t_eval)
    direction = 1.0 if t1 > t0 else -1.0
    counter = [0]
    out = [y.copy()]
    accepted = rejected = 0

    if method == "rk4":
        if h is None:
            h = abs(t1 - t0) / 1000
        t = t0
        for target in times[1:]:
            span = target - t
            nsub = max(1, int(np.ceil(abs(span) / h - 1e-9)))
            hs = span / nsub
            for _ in range(nsub):
                y = rk4_step(fun, t, y, hs, counter)
                t += hs
                accepted += 1
            t = target
            out.append(y.copy())
        return OdeSolution(times, np.array(out), method, accepted=accepted, nfev=counter[0])

    t = t0
    step = abs(h) if h is not None else 0.01 * abs(t1 - t0)
    f0 = None
    for target in times[1:]:
        while direction * (target - t) > 0:
            if accepted + rejected >= max_steps:
                raise IntegrationFailure(f"exceeded {max_steps} steps at t={t:.17g}")
            remaining = abs(target - t)
            last = step >= remaining
            hs = direction * min(step, remaining)
            if abs(hs) < 1e-14 * max(1.0, abs(t)):
                err = StepSizeUnderflow(f"step size underflow at t={t:.17g} (h={hs:.3g})")
                err.t = t
                raise err
            y_new, err_vec, f0 = rkf45_step(fun, t, y, hs, counter, f0)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = np.sqrt(np.mean((err_vec / scale) ** 2))
            if err_norm <= 1.0:
                t = target if last else t + hs
                y = y_new
                f0 = None
                accepted += 1
                factor = 5.0 if err_norm == 0 else min(5.0, 0.9 * err_norm ** (-0.2))
                # a clipped final step says nothing about the natural step size
                if not last or factor < 1.0:
                    step = abs(hs) * factor
            else:
                rejected += 1
                step = abs(hs) * max(0.2, 0.9 * err_norm ** (-0.25))
        out.append(y.copy())
    return OdeSolution(times, np.array(out), method, rtol, atol, accepted, rejected, counter[0])
