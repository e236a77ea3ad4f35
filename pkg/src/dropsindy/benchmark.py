"""Model-template benchmark: cross-drop landing-height error, long forecasts
and error-versus-time curves."""
from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .data_model import Trajectory, group_by_ball
from .diffsmooth import SmootherConfig, compute_derivatives
from .errors import RangeError
from .sindy import (
    FitConfig,
    ModelForecast,
    SparseModel,
    second_order_system,
    simulate_model,
    stlsq,
)

DEFAULT_HORIZON = 2.8
DEFAULT_FORECAST_HORIZON = 15.0


class TemplateId(str, enum.Enum):
    T1 = "T1"  # constant acceleration
    T2 = "T2"  # constant + linear drag
    T3 = "T3"  # constant + linear + quadratic drag
    T4 = "T4"  # full cubic library, low threshold

    @property
    def description(self) -> str:
        return {
            "T1": "constant acceleration",
            "T2": "constant acceleration + linear drag",
            "T3": "constant acceleration + linear and quadratic drag",
            "T4": "overfit cubic library",
        }[self.value]


# Library term names per restricted template.
TEMPLATE_TERMS = {
    TemplateId.T1: ("1",),
    TemplateId.T2: ("1", "v"),
    TemplateId.T3: ("1", "v", "v^2"),
}


@dataclass(frozen=True)
class BenchmarkConfig:
    smoother: SmootherConfig = SmootherConfig()
    smooth: bool = True
    overfit_threshold: float = 0.005
    horizon: float = DEFAULT_HORIZON
    forecast_horizon: float = DEFAULT_FORECAST_HORIZON
    # Initial state for predictions: first smoothed sample ("smoothed") or
    # the smoothed height with the ball at rest ("zero").
    v0_mode: Literal["smoothed", "zero"] = "smoothed"
    # Added to the initial height of long forecasts.
    forecast_height_offset: float = 0.0
    substeps: int = 10

    def __post_init__(self):
        if self.v0_mode not in ("smoothed", "zero"):
            raise ValueError(f"v0_mode must be 'smoothed' or 'zero', got {self.v0_mode!r}")
        if not self.horizon > 0 or not self.forecast_horizon > 0:
            raise ValueError("horizons must be positive")


def fit_template(
    traj: Trajectory,
    template: TemplateId | str,
    cfg: BenchmarkConfig = BenchmarkConfig(),
) -> SparseModel:
    """Fit one model template to a drop.

    T1-T3 are plain least squares on their fixed term set (embedded in the
    full cubic term list, other coefficients zero); T4 runs STLSQ on the full
    cubic library with ``cfg.overfit_threshold``.
    """
    template = TemplateId(template)
    lib, acc, _ = second_order_system(traj, cfg.smoother, 3, cfg.smooth)
    if template is TemplateId.T4:
        return stlsq(lib, acc, FitConfig(cfg.overfit_threshold))
    idx = [lib.index_of(name) for name in TEMPLATE_TERMS[template]]
    sub = stlsq(lib.select(idx), acc, FitConfig(0.0))
    coefs = np.zeros(len(lib.terms))
    coefs[idx] = sub.coefficients
    return SparseModel(coefs, lib.terms, warnings=sub.warnings)


def initial_state(traj: Trajectory, cfg: BenchmarkConfig = BenchmarkConfig()) -> tuple[float, float]:
    ds = compute_derivatives(traj, cfg.smoother, smooth=cfg.smooth)
    v0 = float(ds.velocities[0]) if cfg.v0_mode == "smoothed" else 0.0
    return float(ds.smoothed_heights[0]), v0


def _interp_at(traj: Trajectory, t: float) -> float:
    if t < traj.times[0] or t > traj.times[-1]:
        raise RangeError(
            f"time {t:g} s outside observed range [{traj.times[0]:g}, {traj.times[-1]:g}]",
            lower=float(traj.times[0]),
            upper=float(traj.times[-1]),
        )
    return float(np.interp(t, traj.times, traj.heights))


def _forecast(model: SparseModel, x0: float, v0: float, horizon: float, dt: float, substeps: int) -> ModelForecast:
    n = max(1, math.ceil(horizon / dt - 1e-9))
    return simulate_model(model, x0, v0, horizon / n, n, substeps)


@dataclass(frozen=True)
class CrossDropResult:
    predicted_height: float
    observed_height: float
    abs_error: float
    diverged: bool = False


def cross_drop_prediction(
    model: SparseModel,
    other_drop: Trajectory,
    horizon: float = DEFAULT_HORIZON,
    cfg: BenchmarkConfig = BenchmarkConfig(),
) -> CrossDropResult:
    """Predict ``other_drop``'s height ``horizon`` seconds after its first
    sample, starting from its estimated initial state."""
    t_end = float(other_drop.times[0] + horizon)
    observed = _interp_at(other_drop, t_end)
    x0, v0 = initial_state(other_drop, cfg)
    fc = _forecast(model, x0, v0, horizon, other_drop.dt, cfg.substeps)
    if fc.diverged:
        return CrossDropResult(math.nan, observed, math.inf, True)
    pred = float(fc.heights[-1])
    return CrossDropResult(pred, observed, abs(pred - observed))


def long_forecast(
    model: SparseModel,
    x0: float,
    v0: float,
    horizon: float = DEFAULT_FORECAST_HORIZON,
    dt: float = 1.0 / 15.0,
    substeps: int = 10,
) -> ModelForecast:
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    return _forecast(model, x0, v0, horizon, dt, substeps)


@dataclass(frozen=True, eq=False)
class ErrorSeries:
    times: np.ndarray
    abs_error: np.ndarray
    baseline: np.ndarray
    diverged: bool = False


def error_vs_time(
    model: SparseModel,
    traj: Trajectory,
    cfg: BenchmarkConfig = BenchmarkConfig(),
) -> ErrorSeries:
    """Per-sample |forecast - measured| on the drop's own time grid.

    ``baseline`` is |raw - smoothed| height, the intrinsic-noise reference.
    Samples after a divergence are NaN.
    """
    ds = compute_derivatives(traj, cfg.smoother, smooth=cfg.smooth)
    x0 = float(ds.smoothed_heights[0])
    v0 = float(ds.velocities[0]) if cfg.v0_mode == "smoothed" else 0.0
    fc = simulate_model(model, x0, v0, traj.dt, len(traj) - 1, cfg.substeps)
    err = np.full(len(traj), np.nan)
    k = fc.heights.size
    err[:k] = np.abs(fc.heights - traj.heights[:k])
    baseline = np.abs(traj.heights - ds.smoothed_heights)
    return ErrorSeries(np.array(traj.times), err, baseline, fc.diverged)


@dataclass(frozen=True, eq=False)
class BenchmarkEntry:
    ball_id: str
    train_drop: int
    template: TemplateId
    model: SparseModel
    test_drop: int | None = None
    pred_height: float = math.nan
    observed_height: float = math.nan
    abs_error: float = math.nan
    diverged: bool = False
    forecast: ModelForecast | None = None

    def row(self) -> dict:
        return {
            "ball_id": self.ball_id,
            "train_drop": self.train_drop,
            "template": self.template.value,
            "pred_height_m": self.pred_height,
            "abs_error_m": self.abs_error,
            "diverged": self.diverged,
        }


@dataclass(frozen=True, eq=False)
class BenchmarkReport:
    entries: tuple[BenchmarkEntry, ...]
    notes: tuple[str, ...] = ()

    def select(self, template: TemplateId | str | None = None, ball_id: str | None = None) -> list[BenchmarkEntry]:
        out = list(self.entries)
        if template is not None:
            out = [e for e in out if e.template == TemplateId(template)]
        if ball_id is not None:
            out = [e for e in out if e.ball_id == ball_id]
        return out

    def median_error(self, template: TemplateId | str) -> float:
        errs = [e.abs_error for e in self.select(template) if not math.isnan(e.abs_error)]
        return float(np.median(errs)) if errs else math.nan

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(
            buf,
            fieldnames=["ball_id", "train_drop", "template", "pred_height_m", "abs_error_m", "diverged"],
            lineterminator="\n",
        )
        w.writeheader()
        for e in self.entries:
            w.writerow(e.row())
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "entries": [
                {
                    **e.row(),
                    "test_drop": e.test_drop,
                    "observed_height_m": e.observed_height,
                    "equation": e.model.equation(4),
                    "model": e.model.to_dict(),
                    "forecast_diverged_at_s": e.forecast.diverged_at if e.forecast else None,
                }
                for e in self.entries
            ],
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=True)


def run_benchmark(
    trajectories: Sequence[Trajectory],
    cfg: BenchmarkConfig = BenchmarkConfig(),
    templates: Sequence[TemplateId] = tuple(TemplateId),
) -> BenchmarkReport:
    """Train every template on every drop, predict the same ball's other
    drop at ``cfg.horizon`` and run a long forecast from the training drop's
    initial state.

    Balls with a single drop still get fitted models and long forecasts; the
    missing cross-drop cells are listed in ``notes``.
    """
    entries = []
    notes = []
    for ball, drops in group_by_ball(trajectories).items():
        if len(drops) < 2:
            notes.append(f"{ball}: only drop {drops[0].drop_id} present, cross-drop cells missing")
        for train in drops:
            others = [d for d in drops if d is not train]
            x0, v0 = initial_state(train, cfg)
            for template in templates:
                model = fit_template(train, template, cfg)
                fc = long_forecast(
                    model, x0 + cfg.forecast_height_offset, v0, cfg.forecast_horizon, train.dt, cfg.substeps
                )
                kw = {}
                if others:
                    test = others[0]
                    try:
                        res = cross_drop_prediction(model, test, cfg.horizon, cfg)
                        kw = dict(
                            test_drop=test.drop_id,
                            pred_height=res.predicted_height,
                            observed_height=res.observed_height,
                            abs_error=res.abs_error,
                        )
                    except RangeError as exc:
                        notes.append(f"{ball} drop {train.drop_id} {template.value}: {exc}")
                entries.append(
                    BenchmarkEntry(ball, train.drop_id, template, model, diverged=fc.diverged, forecast=fc, **kw)
                )
    return BenchmarkReport(tuple(entries), tuple(notes))
