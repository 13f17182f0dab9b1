"""Explicit Runge-Kutta steppers for array-valued linear ODEs.

Both steppers land exactly on every requested output time. ``post_step`` is
called on each accepted state (the Lindblad engine uses it to re-symmetrize).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationError

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_E = (
    71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
)


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    rhs_evals: int = 0
    min_step: float = math.inf
    max_step: float = 0.0

    def record(self, h):
        self.accepted += 1
        self.min_step = min(self.min_step, h)
        self.max_step = max(self.max_step, h)

    def as_dict(self):
        return {
            "accepted_steps": self.accepted,
            "rejected_steps": self.rejected,
            "rhs_evals": self.rhs_evals,
            "min_step": None if math.isinf(self.min_step) else self.min_step,
            "max_step": self.max_step,
        }


def _identity(y):
    return y


def rk4_fixed(f, y0, t_grid, max_step, post_step=None, on_output=None):
    """Classical RK4; each grid interval is split into equal steps <= ``max_step``."""
    post_step = post_step or _identity
    stats = StepStats()
    y = np.array(y0, copy=True)
    if on_output is not None:
        on_output(0, y)
    for k in range(1, len(t_grid)):
        t0, t1 = t_grid[k - 1], t_grid[k]
        nsub = max(1, int(math.ceil((t1 - t0) / max_step - 1e-12)))
        h = (t1 - t0) / nsub
        for s in range(nsub):
            t = t0 + s * h
            k1 = f(t, y)
            k2 = f(t + h / 2, y + (h / 2) * k1)
            k3 = f(t + h / 2, y + (h / 2) * k2)
            k4 = f(t + h, y + h * k3)
            y = post_step(y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4))
            stats.rhs_evals += 4
            stats.record(h)
        if on_output is not None:
            on_output(k, y)
    return stats


def _error_norm(err, y, y_new, atol, rtol):
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))


def dopri45(f, y0, t_grid, atol, rtol, max_step=math.inf, post_step=None, on_output=None,
            first_step=None):
    """Adaptive Dormand-Prince 5(4) with standard step-size control.

    Raises:
        IntegrationError: if the step size underflows.
    """
    post_step = post_step or _identity
    stats = StepStats()
    y = np.array(y0, copy=True)
    if on_output is not None:
        on_output(0, y)
    t = float(t_grid[0])
    k1 = f(t, y)
    stats.rhs_evals += 1
    span = float(t_grid[-1] - t_grid[0])
    if first_step is None:
        scale = atol + rtol * np.abs(y)
        d0 = float(np.sqrt(np.mean(np.abs(y / scale) ** 2)))
        d1 = float(np.sqrt(np.mean(np.abs(k1 / scale) ** 2)))
        h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    else:
        h = first_step
    h = min(h, max_step, span if span > 0 else h)

    for k in range(1, len(t_grid)):
        t_end = float(t_grid[k])
        while t < t_end:
            h_min = 16 * np.finfo(float).eps * max(1.0, abs(t))
            if h < h_min:
                raise IntegrationError(f"step size underflow at t={t:.6g}", time=t)
            last = t + h >= t_end - h_min
            step = t_end - t if last else h
            ks = [k1]
            for s in range(1, 7):
                ys = y + step * sum(a * kk for a, kk in zip(_A[s], ks) if a != 0.0)
                ks.append(f(t + _C[s] * step, ys))
            stats.rhs_evals += 6
            y_new = ys  # row 7 of the tableau equals the 5th-order weights (FSAL)
            err = step * sum(e * kk for e, kk in zip(_E, ks) if e != 0.0)
            en = _error_norm(err, y, y_new, atol, rtol)
            if not np.isfinite(en):
                raise IntegrationError(f"non-finite state at t={t:.6g}", time=t)
            if en <= 1.0:
                t = t_end if last else t + step
                y = post_step(y_new)
                k1 = ks[6]
                stats.record(step)
                fac = 5.0 if en == 0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
                if not last or fac < 1.0:
                    h = min(step * fac, max_step)
            else:
                stats.rejected += 1
                h = step * max(0.2, 0.9 * en ** -0.2)
        if on_output is not None:
            on_output(k, y)
    return stats
