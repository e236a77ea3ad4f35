"""Fixed-step classical Runge-Kutta integration."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class RK4Result:
    times: np.ndarray
    states: np.ndarray  # (n_samples, n_states)
    diverged: bool = False
    diverged_step: int | None = None


def rk4(
    rhs: Callable[[np.ndarray], np.ndarray],
    y0,
    dt: float,
    n_steps: int,
    substeps: int = 1,
    blowup: float | None = None,
) -> RK4Result:
    """Integrate the autonomous system ``y' = rhs(y)``.

    The state is recorded every ``dt``; each output interval is covered by
    ``substeps`` RK4 steps.  Integration stops at the first recorded state
    that is non-finite (or exceeds ``blowup`` in magnitude, when given); only
    the samples before it are returned and the result is flagged.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if n_steps < 0 or substeps < 1:
        raise ValueError("n_steps must be >= 0 and substeps >= 1")
    y = np.array(y0, dtype=float)
    h = dt / substeps
    out = np.empty((n_steps + 1, y.size))
    out[0] = y
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, n_steps + 1):
            for _ in range(substeps):
                k1 = rhs(y)
                k2 = rhs(y + 0.5 * h * k1)
                k3 = rhs(y + 0.5 * h * k2)
                k4 = rhs(y + h * k3)
                y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            bad = not np.all(np.isfinite(y))
            if blowup is not None and not bad:
                bad = bool(np.max(np.abs(y)) > blowup)
            if bad:
                return RK4Result(np.arange(k) * dt, out[:k], True, k)
            out[k] = y
    return RK4Result(np.arange(n_steps + 1) * dt, out)
