"""Command-line entry point: ``dropsindy <subcommand> [options]``.

Every run writes its outputs plus ``manifest.json`` into ``--out-dir``.  The
manifest echoes the fully resolved configuration, so ``--config
manifest.json`` repeats a run exactly.  Option precedence is command-line
flag, then ``--config`` file, then built-in default.

Exit codes: 0 success, 1 pipeline error, 2 usage or configuration error,
3 I/O error.  Warnings are reported but never change the exit code.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import warnings
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .benchmark import (
    BenchmarkConfig,
    TemplateId,
    error_vs_time,
    run_benchmark,
)
from .data_model import (
    SIMULATED_BALLS,
    Trajectory,
    add_gaussian_noise,
    derived_seed,
    group_by_ball,
    load_trajectories,
    trajectories_from_json,
    trajectories_to_json,
    write_trajectories,
)
from .diffsmooth import (
    NoiseCalibration,
    SmootherConfig,
    build_noise_calibration,
    default_eta_grid,
    estimate_noise_level,
)
from .errors import ConfigurationError, DropSindyError, RangeError
from .plot import LineChart, check_chart_type, reference_lines, render_heatmap, render_line_chart
from .simulate import (
    ConstantAcceleration,
    LinearDrag,
    QuadraticDrag,
    ReynoldsDependent,
    simulate_drop,
)
from .sindy import (
    FitConfig,
    SparseModel,
    fit_group_second_order,
    fit_second_order,
    sparsity_sweep,
)

EXIT_OK, EXIT_PIPELINE, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

MANIFEST = "manifest.json"
DEFAULT_SWEEP_GRID = (0.004, 0.01, 0.04, 0.1, 0.4, 1.0, 1.5, 4.0, 10.0)

COMMON_DEFAULTS = {"out_dir": ".", "seed": 0, "format": "csv"}
SMOOTH_DEFAULTS = {"window": 35, "poly_order": 3}
FIT_DEFAULTS = {
    **SMOOTH_DEFAULTS,
    "input": None,
    "pipeline": "plain",
    "delta": None,  # 0.1 plain, 1.5 group
    "degree": 3,
    "smooth": True,
    "velocity_only": False,
    "salience": "l1",
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "simulate": {
        "model": "synthetic-set",
        "drag": -0.5,
        "quad": -0.01,
        "coefficients": [-0.1, -0.3, -0.3, -0.5, -0.7],
        "ball": "Ball 2",
        "x0": 35.0,
        "v0": 0.0,
        "rate": 15.0,
        "steps": 49,
        "substeps": 10,
        "drops": 2,
        "eta": [],
    },
    "fit": dict(FIT_DEFAULTS),
    "sweep": {**FIT_DEFAULTS, "deltas": list(DEFAULT_SWEEP_GRID)},
    "benchmark": {
        **SMOOTH_DEFAULTS,
        "input": None,
        "eta": [0.1],
        "coefficients": [-0.1, -0.3, -0.3, -0.5, -0.7],
        "x0": 35.0,
        "rate": 15.0,
        "steps": 49,
        "delta": 0.005,
        "horizon_s": 2.8,
        "forecast_s": 15.0,
        "v0_mode": "smoothed",
        "height_offset": 0.0,
        "smooth": True,
    },
    "noise-estimate": {
        **SMOOTH_DEFAULTS,
        "input": None,
        "replicates": 20,
        "calibration": None,  # default: <out-dir>/calibration.csv
    },
    "plot": {"input": None, "chart": "trajectory"},
}


class RunContext:
    """Collects outputs and warnings for the manifest; writes atomically."""

    def __init__(self, command: str, config: dict):
        self.command = command
        self.config = config
        self.out_dir = Path(config["out_dir"])
        self.outputs: list[str] = []
        self.inputs: list[dict] = []
        self.warnings: list[str] = []
        self.notes: list[str] = []

    def write(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        atomic_write(path, text)
        self.outputs.append(name)
        return path

    def warn(self, message: str) -> None:
        if message not in self.warnings:
            self.warnings.append(message)
            print(f"warning: {message}", file=sys.stderr)

    def add_input(self, path: str) -> None:
        data = Path(path).read_bytes()
        self.inputs.append({"path": str(path), "sha256": hashlib.sha256(data).hexdigest()})

    def manifest(self, status: str, error: str | None = None) -> dict:
        return {
            "command": self.command,
            "version": __version__,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "warnings": self.warnings,
            "notes": self.notes,
            "status": status,
            "error": error,
        }


def atomic_write(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _table_text(rows: list[dict], fieldnames: Sequence[str], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(fieldnames), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def write_table(ctx: RunContext, stem: str, rows: list[dict], fieldnames: Sequence[str]) -> Path:
    fmt = ctx.config["format"]
    return ctx.write(f"{stem}.{fmt}", _table_text(rows, fieldnames, fmt))


def read_table(path: str | Path) -> list[dict]:
    text = Path(path).read_text(encoding="utf-8")
    if str(path).endswith(".json"):
        return json.loads(text)
    return list(csv.DictReader(io.StringIO(text)))


def read_trajectories(ctx: RunContext, path: str | None) -> list[Trajectory]:
    if not path:
        raise ConfigurationError("input: an input trajectory file is required")
    ctx.add_input(path)
    if str(path).endswith(".json"):
        return trajectories_from_json(Path(path).read_text(encoding="utf-8"))
    return load_trajectories(Path(path))


def write_trajs(ctx: RunContext, stem: str, trajs: Sequence[Trajectory]) -> Path:
    if ctx.config["format"] == "json":
        return ctx.write(f"{stem}.json", trajectories_to_json(trajs) + "\n")
    buf = io.StringIO()
    write_trajectories(trajs, buf)
    return ctx.write(f"{stem}.csv", buf.getvalue())


def _eta_label(eta: float) -> str:
    return f"{eta:g}"


def _smoother(cfg: dict) -> SmootherConfig:
    return SmootherConfig(int(cfg["window"]), int(cfg["poly_order"]))


def _label(t: Trajectory) -> str:
    return f"{t.ball_id}/{t.drop_id}"


# -- simulate ---------------------------------------------------------------


def _drag_model(cfg: dict):
    kind = cfg["model"]
    if kind == "constant":
        return ConstantAcceleration()
    if kind == "linear":
        return LinearDrag(coefficient=float(cfg["drag"]))
    if kind == "quadratic":
        return QuadraticDrag(lin=float(cfg["drag"]), quad=float(cfg["quad"]))
    if kind == "reynolds":
        key = str(cfg["ball"])
        for k, ball in enumerate(SIMULATED_BALLS, start=1):
            if key in (ball.label, str(k)):
                return ReynoldsDependent(ball)
        names = ", ".join(b.label for b in SIMULATED_BALLS)
        raise ConfigurationError(f"ball: unknown ball {key!r}; expected one of {names} or 1-5")
    raise ConfigurationError(
        f"model: unknown drag model {kind!r}; expected constant, linear, quadratic, reynolds or synthetic-set"
    )


def cmd_simulate(ctx: RunContext) -> None:
    cfg = ctx.config
    if not cfg["rate"] > 0:
        raise ConfigurationError(f"rate: must be positive, got {cfg['rate']}")
    if int(cfg["drops"]) < 1:
        raise ConfigurationError(f"drops: must be >= 1, got {cfg['drops']}")
    dt = 1.0 / float(cfg["rate"])
    run = dict(x0=float(cfg["x0"]), v0=float(cfg["v0"]), dt=dt, n_steps=int(cfg["steps"]),
               substeps=int(cfg["substeps"]))
    if cfg["model"] == "synthetic-set":
        specs = [(f"ball{k}", LinearDrag(coefficient=float(c))) for k, c in enumerate(cfg["coefficients"], 1)]
        if not specs:
            raise ConfigurationError("coefficients: at least one drag coefficient is required")
    else:
        model = _drag_model(cfg)
        specs = [(getattr(getattr(model, "ball", None), "label", cfg["model"]).replace(" ", "_"), model)]

    trajs = []
    for ball_id, model in specs:
        res = simulate_drop(model, ball_id=ball_id, **run)
        for w in res.warnings:
            ctx.warn(f"{ball_id}: {w}")
        for d in range(1, int(cfg["drops"]) + 1):
            trajs.append(Trajectory(res.times, res.heights, ball_id, d))
    write_trajs(ctx, "trajectories", trajs)

    for i, eta in enumerate(cfg["eta"]):
        eta = float(eta)
        if eta < 0:
            raise ConfigurationError(f"eta: noise levels must be non-negative, got {eta}")
        noisy = [add_gaussian_noise(t, eta, derived_seed(cfg["seed"], i, k)) for k, t in enumerate(trajs)]
        write_trajs(ctx, f"trajectories_eta{_eta_label(eta)}", noisy)


# -- fit / sweep ------------------------------------------------------------


def _fit_config(cfg: dict, delta: float) -> FitConfig:
    return FitConfig(float(delta), salience=cfg["salience"])


def _resolved_delta(cfg: dict) -> float:
    if cfg["delta"] is not None:
        return float(cfg["delta"])
    return 1.5 if cfg["pipeline"] == "group" else 0.1


def _model_warnings(ctx: RunContext, label: str, model: SparseModel) -> None:
    for w in model.warnings:
        ctx.warn(f"{label}: {w}")


def cmd_fit(ctx: RunContext) -> None:
    cfg = ctx.config
    trajs = read_trajectories(ctx, cfg["input"])
    smoother = _smoother(cfg)
    delta = _resolved_delta(cfg)
    fit_cfg = _fit_config(cfg, delta)
    kw = dict(degree=int(cfg["degree"]), smooth=bool(cfg["smooth"]), use_height=not cfg["velocity_only"])
    if cfg["pipeline"] == "group":
        models = list(fit_group_second_order(trajs, smoother, fit_cfg, **kw).models)
    elif cfg["pipeline"] == "plain":
        models = [fit_second_order(t, smoother, fit_cfg, **kw) for t in trajs]
    else:
        raise ConfigurationError(f"pipeline: expected 'group' or 'plain', got {cfg['pipeline']!r}")
    ctx.notes.append(f"delta = {delta:g}")

    lines = []
    for t, m in zip(trajs, models):
        _model_warnings(ctx, _label(t), m)
        lines.append(f"{t.ball_id}\t{t.drop_id}\t{m.equation(4)}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    ctx.write("equations.txt", text)
    payload = [{"ball_id": t.ball_id, "drop_id": t.drop_id, "model": m.to_dict()} for t, m in zip(trajs, models)]
    ctx.write("models.json", json.dumps(payload, indent=2) + "\n")

    # Term x trajectory |coefficient| table for heatmaps.
    labels = [_label(t) for t in trajs]
    rows = [
        {"term": term.name, **{lab: float(abs(m.coefficients[j])) for lab, m in zip(labels, models)}}
        for j, term in enumerate(models[0].terms)
    ]
    write_table(ctx, "heatmap", rows, ["term", *labels])


def cmd_sweep(ctx: RunContext) -> None:
    cfg = ctx.config
    trajs = read_trajectories(ctx, cfg["input"])
    entries = sparsity_sweep(
        trajs,
        [float(d) for d in cfg["deltas"]],
        pipeline=cfg["pipeline"],
        cfg_smooth=_smoother(cfg),
        degree=int(cfg["degree"]),
        base=FitConfig(salience=cfg["salience"]),
        smooth=bool(cfg["smooth"]),
        use_height=not cfg["velocity_only"],
    )
    rows = []
    for e in entries:
        if not e.ok:
            ctx.warn(f"delta {e.delta:g}: {e.error}")
            rows.append({"delta": e.delta, "ball_id": "", "drop_id": "", "equation": "",
                         "term_count": "", "error": e.error})
            continue
        for t, m in zip(trajs, e.models):
            rows.append({"delta": e.delta, "ball_id": t.ball_id, "drop_id": t.drop_id,
                         "equation": m.equation(4), "term_count": e.term_count, "error": ""})
    write_table(ctx, "sweep", rows, ["delta", "ball_id", "drop_id", "equation", "term_count", "error"])


# -- benchmark --------------------------------------------------------------


def _synthetic_twins(cfg: dict) -> list[Trajectory]:
    """Two independently noised drops per linear-drag ball."""
    if len(cfg["eta"]) != 1:
        raise ConfigurationError("eta: benchmark takes exactly one noise level")
    eta = float(cfg["eta"][0])
    out = []
    dt = 1.0 / float(cfg["rate"])
    for b, c in enumerate(cfg["coefficients"], start=1):
        clean = simulate_drop(LinearDrag(coefficient=float(c)), float(cfg["x0"]), 0.0, dt, int(cfg["steps"]))
        for d in (1, 2):
            t = Trajectory(clean.times, clean.heights, f"ball{b}", d)
            out.append(add_gaussian_noise(t, eta, derived_seed(cfg["seed"], b, d)))
    return out


def cmd_benchmark(ctx: RunContext) -> None:
    cfg = ctx.config
    if cfg["input"]:
        trajs = read_trajectories(ctx, cfg["input"])
    else:
        trajs = _synthetic_twins(cfg)
        write_trajs(ctx, "benchmark_input", trajs)
        ctx.notes.append("no input given; used synthetic twin drops (written to benchmark_input)")
    bcfg = BenchmarkConfig(
        smoother=_smoother(cfg),
        smooth=bool(cfg["smooth"]),
        overfit_threshold=float(cfg["delta"]),
        horizon=float(cfg["horizon_s"]),
        forecast_horizon=float(cfg["forecast_s"]),
        v0_mode=cfg["v0_mode"],
        forecast_height_offset=float(cfg["height_offset"]),
    )
    report = run_benchmark(trajs, bcfg)
    ctx.notes.extend(report.notes)
    for e in report.entries:
        _model_warnings(ctx, f"{e.ball_id}/{e.train_drop} {e.template.value}", e.model)
        if e.diverged:
            ctx.warn(f"{e.ball_id}/{e.train_drop} {e.template.value}: forecast diverged "
                     f"at t = {e.forecast.diverged_at:g} s")

    rows = [e.row() for e in report.entries]
    write_table(ctx, "benchmark", rows, list(rows[0]) if rows else ["ball_id"])
    ctx.write("benchmark.json", report.to_json() + "\n")

    fc_rows = []
    for e in report.entries:
        for t, x, v in zip(e.forecast.times, e.forecast.heights, e.forecast.velocities):
            fc_rows.append({"ball_id": e.ball_id, "train_drop": e.train_drop, "template": e.template.value,
                            "time_s": float(t), "height_m": float(x), "velocity_mps": float(v)})
    write_table(ctx, "forecasts", fc_rows,
                ["ball_id", "train_drop", "template", "time_s", "height_m", "velocity_mps"])

    # Error-versus-time on the held-out drop (the training drop if it is alone).
    by_ball = group_by_ball(trajs)
    ev_rows = []
    for e in report.entries:
        drops = by_ball[e.ball_id]
        test = next((d for d in drops if d.drop_id == e.test_drop), None) or next(
            d for d in drops if d.drop_id == e.train_drop
        )
        es = error_vs_time(e.model, test, bcfg)
        for t, err, base in zip(es.times, es.abs_error, es.baseline):
            ev_rows.append({"ball_id": e.ball_id, "train_drop": e.train_drop, "test_drop": test.drop_id,
                            "template": e.template.value, "time_s": float(t),
                            "abs_error_m": float(err), "baseline_m": float(base)})
    write_table(ctx, "error_vs_time", ev_rows,
                ["ball_id", "train_drop", "test_drop", "template", "time_s", "abs_error_m", "baseline_m"])

    for tpl in TemplateId:
        med = report.median_error(tpl)
        print(f"{tpl.value} median |error| at {bcfg.horizon:g} s: {med:.4g} m")


# -- noise estimate ---------------------------------------------------------


def _load_calibration(ctx: RunContext, smoother: SmootherConfig, replicates: int) -> NoiseCalibration:
    cfg = ctx.config
    path = Path(cfg["calibration"]) if cfg["calibration"] else ctx.out_dir / "calibration.csv"
    meta_path = path.with_suffix(".json")
    grid = default_eta_grid()
    key = {
        "window_length": smoother.window_length,
        "poly_order": smoother.poly_order,
        "replicates": replicates,
        "seed": int(cfg["seed"]),
        "n_samples": 50,
        "etas": grid.tolist(),
    }
    if path.exists() and meta_path.exists():
        try:
            cached_key = json.loads(meta_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            cached_key = None
        if cached_key == key:
            ctx.notes.append(f"calibration reused from {path}")
            return NoiseCalibration.from_csv(
                path.read_text(encoding="utf-8"),
                window_length=smoother.window_length,
                poly_order=smoother.poly_order,
                replicates=replicates,
                seed=int(cfg["seed"]),
            )
        ctx.notes.append(f"calibration at {path} has different parameters; regenerated")
    cal = build_noise_calibration(grid, replicates, int(cfg["seed"]), smoother)
    atomic_write(path, cal.to_csv())
    atomic_write(meta_path, json.dumps(cal.key()) + "\n")
    ctx.outputs.extend([str(path), str(meta_path)])
    return cal


def cmd_noise_estimate(ctx: RunContext) -> None:
    cfg = ctx.config
    trajs = read_trajectories(ctx, cfg["input"])
    smoother = _smoother(cfg)
    replicates = int(cfg["replicates"])
    if replicates < 1:
        raise ConfigurationError(f"replicates: must be >= 1, got {replicates}")
    cal = _load_calibration(ctx, smoother, replicates)
    rows, failed = [], []
    for t in trajs:
        row = {"ball_id": t.ball_id, "drop_id": t.drop_id}
        try:
            est = estimate_noise_level(t, smoother, cal)
            row.update(relative_difference=est.relative_difference, eta=est.eta,
                       below_range=est.below_range, error="")
            if est.below_range:
                ctx.warn(f"{_label(t)}: below calibrated range, reporting eta = {est.eta:g}")
        except RangeError as exc:
            row.update(relative_difference="", eta="", below_range="", error=str(exc))
            failed.append(f"{_label(t)}: {exc}")
        rows.append(row)
        print(f"{t.ball_id}\t{t.drop_id}\t{row['eta'] if row['eta'] != '' else row['error']}")
    write_table(ctx, "noise_estimates", rows, ["ball_id", "drop_id", "relative_difference", "eta",
                                               "below_range", "error"])
    if failed:
        raise RangeError("; ".join(failed))


# -- plot -------------------------------------------------------------------


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def _plot_trajectories(ctx: RunContext, trajs: list[Trajectory], log: bool) -> None:
    for ball, drops in group_by_ball(trajs).items():
        if log:
            chart = LineChart(f"{ball}: displacement", "time (s)", "fall distance (m)", log=True)
            for d in drops:
                chart.add(d.times - d.times[0], d.heights[0] - d.heights, f"drop {d.drop_id}")
            reference_lines(chart, (1.0, 2.0))
            ctx.write(f"loglog_{_safe(ball)}.svg", render_line_chart(chart))
        else:
            chart = LineChart(f"{ball}: height", "time (s)", "height (m)")
            for d in drops:
                chart.add(d.times, d.heights, f"drop {d.drop_id}")
            ctx.write(f"trajectory_{_safe(ball)}.svg", render_line_chart(chart))


def _plot_error(ctx: RunContext, rows: list[dict]) -> None:
    groups: dict[tuple[str, str], dict[str, list]] = {}
    for r in rows:
        key = (r["ball_id"], str(r["train_drop"]))
        groups.setdefault(key, {}).setdefault(r["template"], []).append(r)
    for (ball, drop), per_tpl in groups.items():
        chart = LineChart(f"{ball}, trained on drop {drop}", "time (s)", "|error| (m)")
        base = None
        for tpl, rs in sorted(per_tpl.items()):
            t = np.array([float(r["time_s"]) for r in rs])
            chart.add(t, [float(r["abs_error_m"]) for r in rs], tpl)
            base = (t, [float(r["baseline_m"]) for r in rs])
        if base is not None:
            chart.add(*base, "raw - smoothed", dashed=True, color="#888888")
        ctx.write(f"error_{_safe(ball)}_{_safe(drop)}.svg", render_line_chart(chart))


def _plot_heatmap(ctx: RunContext, rows: list[dict]) -> None:
    if not rows:
        raise ConfigurationError("input: heatmap table is empty")
    cols = [c for c in rows[0] if c != "term"]
    terms = [r["term"] for r in rows]
    values = [[float(r[c]) for c in cols] for r in rows]
    ctx.write("heatmap.svg", render_heatmap(values, terms, cols, "|coefficient|"))


def cmd_plot(ctx: RunContext) -> None:
    cfg = ctx.config
    kind = check_chart_type(cfg["chart"])
    path = cfg["input"]
    if not path:
        raise ConfigurationError("input: plot needs a file written by another subcommand")
    if kind in ("trajectory", "loglog"):
        _plot_trajectories(ctx, read_trajectories(ctx, path), log=kind == "loglog")
        return
    ctx.add_input(path)
    rows = read_table(path)
    if kind == "error":
        _plot_error(ctx, rows)
    else:
        _plot_heatmap(ctx, rows)


COMMANDS: dict[str, Callable[[RunContext], None]] = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "sweep": cmd_sweep,
    "benchmark": cmd_benchmark,
    "noise-estimate": cmd_noise_estimate,
    "plot": cmd_plot,
}


# -- argument parsing -------------------------------------------------------


def _float_list(text: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--out-dir", default=S, help="output directory (default: current)")
    p.add_argument("--seed", type=int, default=S, help="master random seed (default 0)")
    p.add_argument("--format", choices=("csv", "json"), default=S, help="table format (default csv)")
    p.add_argument("--config", dest="config_file", default=None,
                   help="JSON config or a previous manifest.json; flags override it")


def _add_smoothing(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--window", type=int, default=S, help="Savitzky-Golay window length (default 35)")
    p.add_argument("--poly-order", type=int, default=S, help="Savitzky-Golay polynomial order (default 3)")


def _add_fit_options(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--input", default=S, help="trajectory CSV or JSON")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--group", dest="pipeline", action="store_const", const="group", default=S,
                   help="group-sparse fit across all trajectories")
    g.add_argument("--plain", dest="pipeline", action="store_const", const="plain", default=S,
                   help="independent STLSQ per trajectory (default)")
    p.add_argument("--degree", type=int, default=S, help="library polynomial degree (default 3)")
    p.add_argument("--no-smooth", dest="smooth", action="store_false", default=S,
                   help="difference raw heights without smoothing")
    p.add_argument("--velocity-only", action="store_true", default=S,
                   help="library of velocity powers only (drop height terms)")
    p.add_argument("--salience", choices=("l1", "l2", "mean-abs", "median-abs", "quantile-25"), default=S,
                   help="group row salience (default l1)")
    _add_smoothing(p)


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="dropsindy", description="Sparse drag-law discovery for falling balls.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate drops and optional noisy copies")
    _add_common(p)
    p.add_argument("--model", default=S,
                   help="synthetic-set (default), constant, linear, quadratic or reynolds")
    p.add_argument("--drag", type=float, default=S, help="linear drag coefficient (default -0.5)")
    p.add_argument("--quad", type=float, default=S, help="quadratic drag coefficient (default -0.01)")
    p.add_argument("--coefficients", type=_float_list, default=S,
                   help="comma-separated linear drag coefficients for synthetic-set")
    p.add_argument("--ball", default=S, help="simulated ball label or index 1-5 for reynolds (default 'Ball 2')")
    p.add_argument("--x0", type=float, default=S, help="initial height in m (default 35)")
    p.add_argument("--v0", type=float, default=S, help="initial velocity in m/s (default 0)")
    p.add_argument("--rate", type=float, default=S, help="sampling rate in Hz (default 15)")
    p.add_argument("--steps", type=int, default=S, help="number of sampling intervals (default 49)")
    p.add_argument("--substeps", type=int, default=S, help="RK4 steps per interval (default 10)")
    p.add_argument("--drops", type=int, default=S, help="drops per ball (default 2)")
    p.add_argument("--eta", type=_float_list, default=S, help="comma-separated noise levels in m")

    p = sub.add_parser("fit", help="fit sparse models to trajectories")
    _add_common(p)
    _add_fit_options(p)
    p.add_argument("--delta", type=float, default=S, help="sparsity threshold (default 0.1 plain, 1.5 group)")

    p = sub.add_parser("sweep", help="fit over a grid of sparsity thresholds")
    _add_common(p)
    _add_fit_options(p)
    p.add_argument("--delta", dest="deltas", type=_float_list, default=S,
                   help="comma-separated threshold grid")

    p = sub.add_parser("benchmark", help="compare model templates on cross-drop prediction")
    _add_common(p)
    _add_smoothing(p)
    p.add_argument("--input", default=S, help="trajectory file; default is a synthetic twin-drop set")
    p.add_argument("--eta", type=_float_list, default=S, help="noise level for the synthetic set (default 0.1)")
    p.add_argument("--coefficients", type=_float_list, default=S, help="synthetic drag coefficients")
    p.add_argument("--delta", type=float, default=S, help="overfit template threshold (default 0.005)")
    p.add_argument("--horizon-s", type=float, default=S, help="cross-drop prediction time (default 2.8)")
    p.add_argument("--forecast-s", type=float, default=S, help="long forecast length (default 15)")
    p.add_argument("--v0-mode", choices=("smoothed", "zero"), default=S,
                   help="initial velocity from the smoothed series or zero")
    p.add_argument("--height-offset", type=float, default=S, help="added to long-forecast initial height")
    p.add_argument("--no-smooth", dest="smooth", action="store_false", default=S)

    p = sub.add_parser("noise-estimate", help="estimate the height noise level per trajectory")
    _add_common(p)
    _add_smoothing(p)
    p.add_argument("--input", default=S, help="trajectory CSV or JSON")
    p.add_argument("--replicates", type=int, default=S, help="calibration replicates per level (default 20)")
    p.add_argument("--calibration", default=S, help="calibration cache path (default <out-dir>/calibration.csv)")

    p = sub.add_parser("plot", help="render SVG charts from files written by other subcommands")
    _add_common(p)
    p.add_argument("--input", default=S, help="trajectory, error_vs_time or heatmap table")
    p.add_argument("--chart", default=S, help="trajectory, loglog, error or heatmap")
    return parser


def resolve_config(command: str, flags: dict, config_file: str | None) -> dict:
    """Merge defaults, then the config file, then explicit flags."""
    known = {**COMMON_DEFAULTS, **DEFAULTS[command]}
    merged = dict(known)
    if config_file:
        data = json.loads(Path(config_file).read_text(encoding="utf-8"))
        if isinstance(data, dict) and "config" in data and "command" in data:
            if data["command"] != command:
                raise ConfigurationError(f"config: manifest is for {data['command']!r}, not {command!r}")
            data = data["config"]
        if not isinstance(data, dict):
            raise ConfigurationError("config: file must contain a JSON object")
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigurationError(f"config: unknown keys {unknown}")
        merged.update(data)
    merged.update(flags)
    if merged["format"] not in ("csv", "json"):
        raise ConfigurationError(f"format: expected csv or json, got {merged['format']!r}")
    return merged


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    flags = vars(ns).copy()
    command = flags.pop("command")
    config_file = flags.pop("config_file", None)
    try:
        config = resolve_config(command, flags, config_file)
    except (ConfigurationError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    ctx = RunContext(command, config)
    code, error = EXIT_OK, None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            COMMANDS[command](ctx)
        except ConfigurationError as exc:
            code, error = EXIT_CONFIG, str(exc)
        except DropSindyError as exc:
            code, error = EXIT_PIPELINE, str(exc)
        except OSError as exc:
            code, error = EXIT_IO, str(exc)
    for w in caught:
        ctx.warn(str(w.message))
    if error:
        print(f"error: {error}", file=sys.stderr)
    try:
        atomic_write(ctx.out_dir / MANIFEST, json.dumps(
            ctx.manifest("ok" if code == EXIT_OK else "error", error), indent=2, default=_json_default
        ) + "\n")
    except OSError as exc:
        print(f"error: cannot write manifest: {exc}", file=sys.stderr)
        return code or EXIT_IO
    return code


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


if __name__ == "__main__":
    sys.exit(main())
