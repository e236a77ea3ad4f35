"""Savitzky-Golay smoothing, finite differences and noise-level estimation."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.signal import savgol_filter

from .data_model import Trajectory, add_gaussian_noise, derived_seed
from .errors import CalibrationError, ConfigurationError, RangeError

Scheme = Literal["centered", "forward"]


@dataclass(frozen=True)
class SmootherConfig:
    window_length: int = 35
    poly_order: int = 3

    def __post_init__(self):
        w, p = self.window_length, self.poly_order
        if w < 5 or w % 2 == 0:
            raise ConfigurationError(f"window_length must be an odd integer >= 5, got {w}")
        if p < 1 or p >= w:
            raise ConfigurationError(f"poly_order must satisfy 1 <= poly_order < window_length, got {p}")


@dataclass(frozen=True, eq=False)
class DerivativeSet:
    times: np.ndarray
    smoothed_heights: np.ndarray
    velocities: np.ndarray
    accelerations: np.ndarray

    @property
    def states(self) -> np.ndarray:
        """``(x, v)`` state matrix, one row per sample."""
        return np.column_stack([self.smoothed_heights, self.velocities])


def savgol_values(values, cfg: SmootherConfig) -> np.ndarray:
    """Savitzky-Golay smoothing of a uniformly sampled series.

    Near the ends the polynomial fitted to the first/last full window is
    evaluated at the boundary abscissae, so the output keeps the input length.
    """
    values = np.asarray(values, dtype=float)
    if values.size < cfg.window_length:
        raise ConfigurationError(
            f"series of length {values.size} is shorter than the smoothing window ({cfg.window_length})"
        )
    return savgol_filter(values, cfg.window_length, cfg.poly_order, mode="interp")


def savgol_smooth(traj: Trajectory, cfg: SmootherConfig) -> Trajectory:
    traj.require_uniform()
    return traj.with_heights(savgol_values(traj.heights, cfg))


def finite_difference(values, dt: float, scheme: Scheme = "centered") -> np.ndarray:
    """First derivative of a uniformly sampled series, same length as input.

    ``centered`` is second order everywhere (one-sided three-point stencils at
    the ends); ``forward`` is first order with a backward step at the end.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    v = np.asarray(values, dtype=float)
    if scheme == "centered":
        if v.size < 3:
            raise ValueError("centered differences need at least 3 samples")
        return np.gradient(v, dt, edge_order=2)
    if scheme == "forward":
        if v.size < 2:
            raise ValueError("forward differences need at least 2 samples")
        out = np.empty_like(v)
        out[:-1] = (v[1:] - v[:-1]) / dt
        out[-1] = (v[-1] - v[-2]) / dt
        return out
    raise ValueError(f"unknown difference scheme {scheme!r}")


def compute_derivatives(
    traj: Trajectory,
    cfg: SmootherConfig = SmootherConfig(),
    smooth: bool = True,
    scheme: Scheme = "centered",
) -> DerivativeSet:
    """Heights, velocities and accelerations for a uniformly sampled drop.

    With ``smooth`` the heights are Savitzky-Golay filtered first; velocity is
    differenced from the (smoothed) heights and acceleration from velocity.
    """
    dt = traj.require_uniform()
    x = savgol_values(traj.heights, cfg) if smooth else np.array(traj.heights)
    v = finite_difference(x, dt, scheme)
    a = finite_difference(v, dt, scheme)
    return DerivativeSet(np.array(traj.times), x, v, a)


def relative_l2(approx, reference) -> float:
    approx = np.asarray(approx, dtype=float)
    reference = np.asarray(reference, dtype=float)
    return float(np.linalg.norm(approx - reference) / np.linalg.norm(reference))


def smoothing_difference(traj: Trajectory, cfg: SmootherConfig) -> float:
    """Relative l2 change caused by smoothing the heights."""
    return relative_l2(savgol_smooth(traj, cfg).heights, traj.heights)


def reference_trajectory(n_samples: int = 50, rate: float = 15.0, x0: float = 40.0) -> Trajectory:
    """Linear-drag drop v' = -9.8 - 0.5 v from rest, sampled exactly.

    Closed form: v = -19.6 (1 - e^{-t/2}), x = x0 - 19.6 t + 39.2 (1 - e^{-t/2}).
    """
    t = np.arange(n_samples) / rate
    x = x0 - 19.6 * t + 39.2 * (1.0 - np.exp(-0.5 * t))
    return Trajectory(t, x, "reference", 1)


@dataclass(frozen=True, eq=False)
class NoiseCalibration:
    """Monotone table of noise level versus smoothing difference."""

    etas: np.ndarray
    differences: np.ndarray
    window_length: int = 35
    poly_order: int = 3
    replicates: int = 0
    seed: int | None = None
    n_samples: int = 50
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        etas = np.asarray(self.etas, dtype=float)
        diffs = np.asarray(self.differences, dtype=float)
        if etas.ndim != 1 or etas.shape != diffs.shape or etas.size < 2:
            raise CalibrationError("calibration needs at least two (eta, difference) pairs")
        if np.any(np.diff(etas) <= 0):
            raise CalibrationError("calibration noise levels must be strictly increasing")
        if np.any(np.diff(diffs) <= 0):
            raise CalibrationError(
                "calibration curve is not strictly increasing; use more replicates"
            )
        object.__setattr__(self, "etas", etas)
        object.__setattr__(self, "differences", diffs)

    def key(self) -> dict:
        return {
            "window_length": self.window_length,
            "poly_order": self.poly_order,
            "replicates": self.replicates,
            "seed": self.seed,
            "n_samples": self.n_samples,
            "etas": self.etas.tolist(),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eta", "relative_difference"])
        for e, d in zip(self.etas, self.differences):
            w.writerow([repr(float(e)), repr(float(d))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, **params) -> "NoiseCalibration":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["eta", "relative_difference"]:
            raise CalibrationError("calibration CSV must start with header 'eta,relative_difference'")
        data = np.array([[float(a), float(b)] for a, b in rows[1:] if a.strip()])
        return cls(data[:, 0], data[:, 1], **params)


def build_noise_calibration(
    eta_grid: Sequence[float],
    replicates: int = 20,
    seed: int = 0,
    cfg: SmootherConfig = SmootherConfig(),
    n_samples: int = 50,
) -> NoiseCalibration:
    """Mean smoothing difference of the reference drop at each noise level.

    Replicate ``r`` at grid index ``i`` draws its noise from the stream
    ``(seed, i, r)``, so the table does not depend on evaluation order.
    """
    etas = np.asarray(eta_grid, dtype=float)
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")
    if etas.ndim != 1 or etas.size < 2:
        raise ValueError("eta_grid needs at least two values")
    if np.any(etas <= 0) or np.any(np.diff(etas) <= 0):
        raise ValueError("eta_grid must be positive and strictly increasing")
    ref = reference_trajectory(n_samples)
    diffs = np.empty(etas.size)
    for i, eta in enumerate(etas):
        samples = [
            smoothing_difference(add_gaussian_noise(ref, eta, derived_seed(seed, i, r)), cfg)
            for r in range(replicates)
        ]
        diffs[i] = np.mean(samples)
    return NoiseCalibration(
        etas, diffs, cfg.window_length, cfg.poly_order, replicates, seed, n_samples
    )


def default_eta_grid() -> np.ndarray:
    """0.01 to ~3.16 m, ten points per decade.

    Below ~0.01 m the curve flattens onto the smoothing bias of the clean
    reference drop and replicate scatter breaks monotonicity.
    """
    return np.logspace(-2, 0.5, 26)


@dataclass(frozen=True)
class NoiseEstimate:
    eta: float
    relative_difference: float
    below_range: bool = False


def estimate_noise_level(
    traj: Trajectory,
    cfg: SmootherConfig,
    calibration: NoiseCalibration,
) -> NoiseEstimate:
    """Invert the calibration curve at the trajectory's smoothing difference.

    Interpolation is piecewise linear in log-log coordinates.  Differences
    below the calibrated range return the smallest calibrated noise level with
    ``below_range`` set; differences above it raise :class:`RangeError`.
    """
    if calibration.window_length != cfg.window_length or calibration.poly_order != cfg.poly_order:
        raise ConfigurationError(
            f"calibration was built for window {calibration.window_length}/order "
            f"{calibration.poly_order}, not {cfg.window_length}/{cfg.poly_order}"
        )
    d = smoothing_difference(traj, cfg)
    lo, hi = calibration.differences[0], calibration.differences[-1]
    if d > hi:
        raise RangeError(
            f"smoothing difference {d:.3g} exceeds calibrated range [{lo:.3g}, {hi:.3g}]",
            lower=float(calibration.etas[-1]),
            upper=None,
        )
    if d < lo:
        return NoiseEstimate(float(calibration.etas[0]), d, below_range=True)
    eta = np.exp(np.interp(np.log(d), np.log(calibration.differences), np.log(calibration.etas)))
    return NoiseEstimate(float(eta), d)
