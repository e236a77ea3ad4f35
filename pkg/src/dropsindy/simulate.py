"""Falling-sphere simulation under constant, linear, quadratic and
Reynolds-number-dependent drag."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.optimize import bisect

from .data_model import AIR, BallSpec, FluidSpec, Trajectory, write_trajectories
from .errors import SearchError, SimulationError
from .integrate import rk4

G = -9.8

# Upper validity bound of the Brown-Lawler correlation (onset of the drag crisis).
BROWN_LAWLER_RE_MAX = 2.0e5
DRAG_CRISIS_WARNING = "entered drag-crisis range"


class DragCrisisWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ConstantAcceleration:
    g: float = G


@dataclass(frozen=True)
class LinearDrag:
    g: float = G
    coefficient: float = -0.5


@dataclass(frozen=True)
class QuadraticDrag:
    """``a = g + lin*v + quad*|v|*v``; negative coefficients oppose motion.

    For a falling ball (v <= 0) the quadratic term equals ``-quad * v**2``.
    """

    g: float = G
    lin: float = 0.0
    quad: float = -0.01


@dataclass(frozen=True)
class ReynoldsDependent:
    ball: BallSpec
    fluid: FluidSpec = AIR
    g: float = G


DragModel = Union[ConstantAcceleration, LinearDrag, QuadraticDrag, ReynoldsDependent]


def reynolds_number(fluid: FluidSpec, diameter: float, speed: float) -> float:
    if not diameter > 0:
        raise ValueError(f"diameter must be positive, got {diameter}")
    if speed < 0:
        raise ValueError(f"speed must be non-negative, got {speed}")
    return fluid.density * speed * diameter / fluid.dynamic_viscosity


def _brown_lawler(re):
    return 24.0 / re * (1.0 + 0.150 * re**0.681) + 0.407 / (1.0 + 8710.0 / re)


def brown_lawler_cd(re: float) -> float:
    """Smooth-sphere drag coefficient (Brown & Lawler 2003 correlation).

    Valid below Re = 2e5; larger values are clamped there with a
    :class:`DragCrisisWarning`.
    """
    if not re > 0:
        raise ValueError(f"Reynolds number must be positive, got {re}")
    if re >= BROWN_LAWLER_RE_MAX:
        warnings.warn(f"Re={re:.3g} {DRAG_CRISIS_WARNING}; clamped to 2e5", DragCrisisWarning, stacklevel=2)
        re = BROWN_LAWLER_RE_MAX
    return float(_brown_lawler(re))


def _reynolds_drag(model: ReynoldsDependent, v: float) -> tuple[float, bool]:
    """Magnitude of the drag acceleration and whether Re was clamped."""
    if v == 0.0:
        return 0.0, False
    ball, fluid = model.ball, model.fluid
    re = fluid.density * abs(v) * ball.diameter / fluid.dynamic_viscosity
    clamped = re >= BROWN_LAWLER_RE_MAX
    cd = _brown_lawler(min(re, BROWN_LAWLER_RE_MAX))
    return 0.5 * fluid.density * v * v * ball.area * cd / ball.mass, clamped


def drag_acceleration(model: DragModel, v: float) -> float:
    """Total acceleration (gravity plus drag) at velocity ``v``."""
    if isinstance(model, ConstantAcceleration):
        return model.g
    if isinstance(model, LinearDrag):
        return model.g + model.coefficient * v
    if isinstance(model, QuadraticDrag):
        return model.g + model.lin * v + model.quad * abs(v) * v
    if isinstance(model, ReynoldsDependent):
        drag, _ = _reynolds_drag(model, v)
        return model.g - math.copysign(drag, v)
    raise TypeError(f"unknown drag model {model!r}")


@dataclass(frozen=True, eq=False)
class SimResult:
    trajectory: Trajectory
    velocities: np.ndarray
    reynolds_numbers: np.ndarray | None = None
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def times(self) -> np.ndarray:
        return self.trajectory.times

    @property
    def heights(self) -> np.ndarray:
        return self.trajectory.heights

    def write_csv(self, dest) -> None:
        """Trajectory CSV plus ``velocity_ms`` (and ``reynolds`` when known)."""
        extra = {"velocity_ms": [self.velocities]}
        if self.reynolds_numbers is not None:
            extra["reynolds"] = [self.reynolds_numbers]
        write_trajectories([self.trajectory], dest, extra)


def simulate_drop(
    model: DragModel,
    x0: float = 35.0,
    v0: float = 0.0,
    dt: float = 1.0 / 15.0,
    n_steps: int = 49,
    substeps: int = 10,
    ball_id: str = "sim",
    drop_id: int = 1,
) -> SimResult:
    """RK4 integration of ``x' = v, v' = drag_acceleration(v)``.

    Returns ``n_steps + 1`` samples at ``k * dt``; each interval is split into
    ``substeps`` RK4 steps.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    clamped = False

    def rhs(y):
        nonlocal clamped
        if isinstance(model, ReynoldsDependent):
            drag, c = _reynolds_drag(model, y[1])
            clamped = clamped or c
            acc = model.g - math.copysign(drag, y[1])
        else:
            acc = drag_acceleration(model, y[1])
        return np.array([y[1], acc])

    res = rk4(rhs, [x0, v0], dt, n_steps, substeps)
    if res.diverged:
        raise SimulationError("state became non-finite", step=res.diverged_step)
    x, v = res.states[:, 0], res.states[:, 1]
    traj = Trajectory(res.times, x, ball_id, drop_id)
    re = None
    if isinstance(model, ReynoldsDependent):
        re = model.fluid.density * np.abs(v) * model.ball.diameter / model.fluid.dynamic_viscosity
        clamped = clamped or bool(np.any(re >= BROWN_LAWLER_RE_MAX))
    notes = (DRAG_CRISIS_WARNING,) if clamped else ()
    return SimResult(traj, v, re, notes)


def terminal_velocity(model: DragModel, vmax: float = 1e3) -> float:
    """Velocity at which the total acceleration vanishes."""
    if isinstance(model, ConstantAcceleration):
        raise ValueError("constant-acceleration model has no terminal velocity")
    if isinstance(model, LinearDrag):
        if model.coefficient == 0:
            raise ValueError("linear drag coefficient is zero; no terminal velocity")
        return model.g / abs(model.coefficient)
    if model.g == 0:
        return 0.0
    direction = math.copysign(1.0, model.g)
    f = lambda v: drag_acceleration(model, v)
    end = direction * vmax
    if np.sign(f(end)) == np.sign(f(0.0)):
        raise SearchError(f"no sign change of the acceleration within |v| <= {vmax:g} m/s")
    lo, hi = sorted((0.0, end))
    return float(bisect(f, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=500))


def synthetic_linear_drag_set(
    coefficients=(-0.1, -0.3, -0.3, -0.5, -0.7),
    n_drops: int = 2,
    x0: float = 35.0,
    dt: float = 1.0 / 15.0,
    n_steps: int = 49,
    g: float = G,
) -> list[Trajectory]:
    """Noise-free linear-drag drops, ``n_drops`` identical drops per ball."""
    out = []
    for b, c in enumerate(coefficients, start=1):
        sim = simulate_drop(LinearDrag(g, c), x0, 0.0, dt, n_steps)
        for d in range(1, n_drops + 1):
            out.append(Trajectory(sim.times, sim.heights, f"ball{b}", d))
    return out
