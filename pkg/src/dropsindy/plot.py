"""Static SVG charts: line charts (linear or log-log axes) and coefficient
heatmaps.  Presentation only."""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np

from .errors import ConfigurationError

CHART_TYPES = ("trajectory", "loglog", "error", "heatmap")

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")
# Text stays as <text> elements and ids are stable, so output is diffable.
SVG_RC = {"svg.fonttype": "none", "svg.hashsalt": "dropsindy"}


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    dashed: bool = False
    color: str | None = None


@dataclass
class LineChart:
    title: str
    xlabel: str
    ylabel: str
    series: list[Series] = field(default_factory=list)
    log: bool = False

    def add(self, x, y, label="", dashed=False, color=None) -> "LineChart":
        self.series.append(Series(np.asarray(x, float), np.asarray(y, float), label, dashed, color))
        return self


def _svg(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def render_line_chart(chart: LineChart) -> str:
    """SVG text for a line chart.  Non-finite points (and non-positive ones on
    log axes) break the line."""
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        for k, s in enumerate(chart.series):
            y = s.y.copy()
            y[~np.isfinite(y) | ~np.isfinite(s.x)] = np.nan
            if chart.log:
                y[(s.x <= 0) | (y <= 0)] = np.nan
            ax.plot(s.x, y, color=s.color or PALETTE[k % len(PALETTE)], linestyle="--" if s.dashed else "-",
                    linewidth=1.5, label=s.label or None)
        if chart.log:
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_title(chart.title)
        ax.set_xlabel(chart.xlabel)
        ax.set_ylabel(chart.ylabel)
        if any(s.label for s in chart.series):
            ax.legend(loc="center left", bbox_to_anchor=(1.02, 0.5), frameon=False)
        fig.tight_layout()
        return _svg(fig)


def reference_lines(chart: LineChart, slopes: Sequence[float] = (1.0, 2.0)) -> LineChart:
    """Add dashed power-law guides ``y = c x**slope`` through the first point of
    the first series with positive data."""
    for s in chart.series:
        ok = (s.x > 0) & (s.y > 0) & np.isfinite(s.x) & np.isfinite(s.y)
        if ok.any():
            x = s.x[ok]
            xa, ya = x[0], s.y[ok][0]
            break
    else:
        return chart
    grid = np.geomspace(x.min(), x.max(), 20)
    for p in slopes:
        chart.add(grid, ya * (grid / xa) ** p, f"slope {p:g}", dashed=True, color="#888888")
    return chart


def render_heatmap(values, row_labels: Sequence[str], col_labels: Sequence[str], title: str = "") -> str:
    """Grid of cells shaded by ``|value|``."""
    a = np.abs(np.asarray(values, dtype=float))
    if a.shape != (len(row_labels), len(col_labels)):
        raise ConfigurationError(f"heatmap shape {a.shape} does not match labels")
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.9 * len(col_labels) + 2), max(3.0, 0.35 * len(row_labels) + 1.5)))
        im = ax.imshow(a, cmap="Blues", aspect="auto", vmin=0)
        ax.set_xticks(range(len(col_labels)), col_labels, rotation=45, ha="right")
        ax.set_yticks(range(len(row_labels)), row_labels)
        ax.set_title(title)
        fig.colorbar(im, ax=ax)
        fig.tight_layout()
        return _svg(fig)


def check_chart_type(kind: str) -> str:
    if kind not in CHART_TYPES:
        raise ConfigurationError(f"unknown chart type {kind!r}; expected one of {', '.join(CHART_TYPES)}")
    return kind
