"""Trajectories, ball/fluid descriptions, CSV ingestion and noise injection.

All quantities are SI: seconds, meters, kilograms.  Heights point up, so a
falling ball has decreasing heights and negative velocities.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import NotReachedError, ParseError, ValidationError

CSV_HEADER = ("ball_id", "drop_id", "time_s", "height_m")

# Relative tolerance on the spread of time steps for a grid to count as uniform.
UNIFORM_RTOL = 1e-9


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Height samples of a single drop of a single ball."""

    times: np.ndarray
    heights: np.ndarray
    ball_id: str = "ball"
    drop_id: int = 1

    def __post_init__(self):
        times = _frozen(self.times)
        heights = _frozen(self.heights)
        if times.ndim != 1 or heights.ndim != 1:
            raise ValidationError("times and heights must be one-dimensional")
        if times.shape != heights.shape:
            raise ValidationError(
                f"times ({times.size}) and heights ({heights.size}) differ in length"
            )
        if times.size < 3:
            raise ValidationError(
                f"trajectory {self.ball_id}/{self.drop_id} needs at least 3 samples, got {times.size}"
            )
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(heights))):
            raise ValidationError("times and heights must be finite")
        if np.any(np.diff(times) <= 0):
            raise ValidationError(
                f"times of {self.ball_id}/{self.drop_id} are not strictly increasing"
            )
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "heights", heights)
        object.__setattr__(self, "drop_id", int(self.drop_id))
        object.__setattr__(self, "ball_id", str(self.ball_id))

    def __len__(self) -> int:
        return self.times.size

    @property
    def key(self) -> tuple[str, int]:
        return (self.ball_id, self.drop_id)

    @property
    def dt(self) -> float:
        """Mean sampling interval."""
        return float((self.times[-1] - self.times[0]) / (self.times.size - 1))

    def is_uniform(self, rtol: float = UNIFORM_RTOL) -> bool:
        steps = np.diff(self.times)
        return bool(np.max(np.abs(steps - steps.mean())) <= rtol * steps.mean())

    def require_uniform(self) -> float:
        """Return the sampling interval, raising if the grid is not uniform."""
        if not self.is_uniform():
            raise ValidationError(
                f"trajectory {self.ball_id}/{self.drop_id} is not uniformly sampled"
            )
        return self.dt

    def with_heights(self, heights) -> "Trajectory":
        return Trajectory(self.times, heights, self.ball_id, self.drop_id)

    def to_dict(self) -> dict:
        return {
            "ball_id": self.ball_id,
            "drop_id": self.drop_id,
            "times": self.times.tolist(),
            "heights": self.heights.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Trajectory":
        return cls(data["times"], data["heights"], data["ball_id"], data["drop_id"])


@dataclass(frozen=True)
class BallSpec:
    radius: float
    mass: float
    label: str = "ball"

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValidationError(f"ball radius must be positive, got {self.radius}")
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ValidationError(f"ball mass must be positive, got {self.mass}")

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def area(self) -> float:
        """Cross-sectional area."""
        return math.pi * self.radius**2

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * math.pi * self.radius**3

    @property
    def density(self) -> float:
        return self.mass / self.volume


@dataclass(frozen=True)
class FluidSpec:
    density: float = 1.211
    dynamic_viscosity: float = 1.82e-5

    def __post_init__(self):
        if not self.density > 0:
            raise ValidationError(f"fluid density must be positive, got {self.density}")
        if not self.dynamic_viscosity > 0:
            raise ValidationError(
                f"dynamic viscosity must be positive, got {self.dynamic_viscosity}"
            )


# Air at sea level, 18 C.
AIR = FluidSpec()

# Measured balls from the bridge drops (the volleyball has no recorded mass).
MEASURED_BALLS = {
    b.label: b
    for b in (
        BallSpec(0.021963, 0.045359, "Golf Ball"),
        BallSpec(0.035412, 0.141747, "Baseball"),
        BallSpec(0.033025, 0.056699, "Tennis Ball"),
        BallSpec(0.119366, 0.510291, "Blue Basketball"),
        BallSpec(0.116581, 0.453592, "Green Basketball"),
        BallSpec(0.036287, 0.028349, "Whiffle Ball 1"),
        BallSpec(0.036287, 0.028349, "Whiffle Ball 2"),
        BallSpec(0.046155, 0.042524, "Yellow Whiffle Ball"),
        BallSpec(0.046155, 0.042524, "Orange Whiffle Ball"),
    )
}

# Rounded ball properties used for the Reynolds-dependent synthetic drops.
SIMULATED_BALLS = (
    BallSpec(0.022, 0.0454, "Ball 1"),
    BallSpec(0.033, 0.0567, "Ball 2"),
    BallSpec(0.036, 0.0283, "Ball 3"),
    BallSpec(0.035, 0.1417, "Ball 4"),
    BallSpec(0.119, 0.5103, "Ball 5"),
)


def _open_text(source) -> tuple[IO[str], bool]:
    if hasattr(source, "read"):
        return source, False
    if isinstance(source, (str, os.PathLike)) and (
        isinstance(source, os.PathLike) or "\n" not in source
    ):
        return open(source, "r", encoding="utf-8", newline=""), True
    return io.StringIO(str(source)), False


def load_trajectories(source) -> list[Trajectory]:
    """Read trajectories from CSV text, a path, or an open text stream.

    Rows are grouped by ``(ball_id, drop_id)``; groups are returned in order of
    first appearance.  Within a group, rows must already be in strictly
    increasing time order.
    """
    stream, owned = _open_text(source)
    try:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty input, expected a header row", line=1) from None
        header = [h.strip().lstrip("﻿") for h in header]
        missing = [c for c in CSV_HEADER if c not in header]
        if missing:
            raise ParseError(f"header is missing columns {missing}", line=1)
        col = {name: header.index(name) for name in CSV_HEADER}

        groups: OrderedDict[tuple[str, int], tuple[list[float], list[float], list[int]]] = OrderedDict()
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=line)
            try:
                ball = row[col["ball_id"]].strip()
                drop = int(row[col["drop_id"]])
                t = float(row[col["time_s"]])
                h = float(row[col["height_m"]])
            except ValueError as exc:
                raise ParseError(str(exc), line=line) from None
            if not ball:
                raise ParseError("empty ball_id", line=line)
            if not (math.isfinite(t) and math.isfinite(h)):
                raise ParseError("non-finite time or height", line=line)
            ts, hs, lines = groups.setdefault((ball, drop), ([], [], []))
            if ts and t <= ts[-1]:
                raise ValidationError(
                    f"line {line}: time {t} for {ball}/{drop} does not increase "
                    f"(previous {ts[-1]} on line {lines[-1]})"
                )
            ts.append(t)
            hs.append(h)
            lines.append(line)
    finally:
        if owned:
            stream.close()

    if not groups:
        raise ValidationError("no trajectory rows found")
    return [Trajectory(ts, hs, ball, drop) for (ball, drop), (ts, hs, _) in groups.items()]


def write_trajectories(
    trajectories: Iterable[Trajectory],
    dest,
    extra_columns: dict[str, Sequence[Sequence[float]]] | None = None,
) -> None:
    """Write trajectories in the CSV schema.

    ``extra_columns`` maps a column name to one value sequence per trajectory.
    Floats are written with ``repr`` so a reload is exact.
    """
    trajectories = list(trajectories)
    extra_columns = extra_columns or {}
    for name, per_traj in extra_columns.items():
        if len(per_traj) != len(trajectories):
            raise ValueError(f"extra column {name!r} needs one series per trajectory")

    def _write(stream):
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(list(CSV_HEADER) + list(extra_columns))
        for k, traj in enumerate(trajectories):
            for i in range(len(traj)):
                row = [traj.ball_id, traj.drop_id, repr(float(traj.times[i])), repr(float(traj.heights[i]))]
                row += [repr(float(extra_columns[name][k][i])) for name in extra_columns]
                writer.writerow(row)

    if hasattr(dest, "write"):
        _write(dest)
    else:
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            _write(fh)


def trajectories_to_json(trajectories: Iterable[Trajectory]) -> str:
    return json.dumps([t.to_dict() for t in trajectories])


def trajectories_from_json(text: str) -> list[Trajectory]:
    data = json.loads(text)
    if isinstance(data, dict):
        data = [data]
    return [Trajectory.from_dict(d) for d in data]


def make_rng(seed: int | Sequence[int]) -> np.random.Generator:
    """PCG64 generator seeded through ``SeedSequence`` (portable across platforms)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def derived_seed(seed: int, *index: int) -> list[int]:
    """Entropy for an independent sub-stream keyed by ``(seed, *index)``."""
    return [int(seed), *map(int, index)]


def add_gaussian_noise(traj: Trajectory, eta: float, seed: int | Sequence[int]) -> Trajectory:
    """Return a copy with i.i.d. N(0, eta^2) noise added to the heights."""
    if not eta >= 0:
        raise ValueError(f"noise level must be non-negative, got {eta}")
    if eta == 0:
        return traj.with_heights(traj.heights)
    eps = make_rng(seed).standard_normal(len(traj))
    return traj.with_heights(traj.heights + eta * eps)


def time_to_fall_distance(traj: Trajectory, distance: float) -> float:
    """First time the ball is ``distance`` below its starting height.

    Linear interpolation between the bracketing samples.
    """
    if not distance > 0:
        raise ValueError(f"distance must be positive, got {distance}")
    descent = traj.heights[0] - traj.heights
    hits = np.nonzero(descent >= distance)[0]
    if hits.size == 0:
        raise NotReachedError(distance, float(descent.max()))
    i = int(hits[0])
    if i == 0:
        return float(traj.times[0])
    d0, d1 = descent[i - 1], descent[i]
    frac = (distance - d0) / (d1 - d0)
    return float(traj.times[i - 1] + frac * (traj.times[i] - traj.times[i - 1]))


def group_by_ball(trajectories: Iterable[Trajectory]) -> OrderedDict[str, list[Trajectory]]:
    out: OrderedDict[str, list[Trajectory]] = OrderedDict()
    for t in trajectories:
        out.setdefault(t.ball_id, []).append(t)
    for drops in out.values():
        drops.sort(key=lambda t: t.drop_id)
    return out
