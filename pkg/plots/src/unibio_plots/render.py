"""Deterministic figure rendering.

Rendering runs under a fully pinned rcParams dict (fonts that ship with
matplotlib, fixed figure size/dpi, fixed color cycle) and the Agg
raster path, with file metadata pinned to constants (no timestamps), so
rendering the same spec against the same traces twice produces
byte-identical output.  That property is load-bearing: figure files can
be diffed in review and cached by content hash.

Two figure kinds:

- ``series`` — one curve per trace, optionally on log-log axes with a
  dashed fitted-slope guide line per curve;
- ``slopes`` — one fitted log-log slope per trace, plotted against the
  uniform-convexity degree ``p`` from the trace filename, one line per
  algorithm (median across seeds, individual seeds scattered when
  present).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib as mpl
import numpy as np
from cycler import cycler
from matplotlib.figure import Figure

from .figspec import FigureSpec
from .traces import TraceFile, default_labels, fit_loglog, read_trace

__all__ = ["PINNED_RCPARAMS", "build_figure", "render_figure"]

_SOFTWARE = "unibio-plots 0.1.0"

_COLOR_CYCLE = (
    "#4477aa",
    "#ee6677",
    "#228833",
    "#ccbb44",
    "#66ccee",
    "#aa3377",
    "#bbbbbb",
)

PINNED_RCPARAMS: dict[str, object] = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 100.0,
    "figure.facecolor": "white",
    "savefig.dpi": 100.0,
    "savefig.facecolor": "white",
    "font.family": "DejaVu Sans",
    "font.size": 10.0,
    "mathtext.fontset": "dejavusans",
    "axes.titlesize": 11.0,
    "axes.labelsize": 10.0,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "grid.linewidth": 0.6,
    "lines.linewidth": 1.6,
    "lines.markersize": 5.0,
    "legend.frameon": False,
    "legend.fontsize": 9.0,
    "axes.prop_cycle": cycler(color=list(_COLOR_CYCLE)),
    "path.simplify": False,
}

_AXIS_LABELS = {
    "t": "iteration t",
    "grad_true": "true hypergradient norm",
    "grad_est": "hypergradient estimate norm",
    "grad_avg": "averaged gradient norm",
    "m_norm": "update direction norm",
    "oracle_ul": "cumulative upper-gradient oracle calls",
    "oracle_ll": "cumulative lower-gradient oracle calls",
    "oracle_cross": "cumulative cross-gradient oracle calls",
    "oracle_gen": "cumulative generalized-Jacobian oracle calls",
    "oracle_total": "cumulative oracle calls",
    "elapsed_s": "elapsed seconds",
}


def _render_series(ax, spec: FigureSpec, traces: list[TraceFile]) -> None:
    labels = list(spec.labels) if spec.labels else default_labels(traces)
    for trace, label in zip(traces, labels):
        x = trace.column(spec.x)
        y = trace.column(spec.column)
        keep = np.isfinite(x) & np.isfinite(y)
        if spec.loglog:
            keep &= (x > 0.0) & (y > 0.0)
        if not keep.any():
            raise ValueError(
                f"{trace.path.name}: no plottable points for "
                f"{spec.column!r} vs {spec.x!r}"
            )
        xk, yk = x[keep], y[keep]
        fit = None
        if spec.overlay_slopes:
            fit = fit_loglog(xk, yk, spec.window)
            label = f"{label} (slope {fit.slope:+.2f})"
        (line,) = ax.plot(xk, yk, label=label)
        if fit is not None:
            lo, hi = (xk.min(), xk.max()) if spec.window is None else (
                max(spec.window[0], xk.min()),
                min(spec.window[1], xk.max()),
            )
            gx = np.geomspace(lo, hi, 64)
            gy = np.exp(fit.intercept) * gx**fit.slope
            ax.plot(
                gx,
                gy,
                linestyle="--",
                linewidth=1.0,
                alpha=0.8,
                color=line.get_color(),
                label="_nolegend_",
            )
    if spec.loglog:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(spec.xlabel or _AXIS_LABELS.get(spec.x, spec.x))
    ax.set_ylabel(spec.ylabel or _AXIS_LABELS.get(spec.column, spec.column))


def _render_slopes(ax, spec: FigureSpec, traces: list[TraceFile]) -> None:
    by_algo: dict[str, dict[float, list[float]]] = {}
    for trace in traces:
        fit = fit_loglog(trace.column(spec.x), trace.column(spec.column), spec.window)
        by_algo.setdefault(trace.algo, {}).setdefault(trace.p, []).append(fit.slope)
    multi_seed = any(
        len(slopes) > 1 for groups in by_algo.values() for slopes in groups.values()
    )
    for algo in sorted(by_algo):
        groups = by_algo[algo]
        ps = sorted(groups)
        medians = [float(np.median(groups[p])) for p in ps]
        (line,) = ax.plot(ps, medians, marker="o", label=algo)
        if multi_seed:
            for p in ps:
                ax.plot(
                    [p] * len(groups[p]),
                    groups[p],
                    linestyle="none",
                    marker=".",
                    alpha=0.45,
                    color=line.get_color(),
                    label="_nolegend_",
                )
    ax.set_xlabel(spec.xlabel or "uniform convexity degree p")
    ax.set_ylabel(spec.ylabel or f"log-log slope of {spec.column}")


def _build(spec: FigureSpec) -> Figure:
    traces = [read_trace(path) for path in spec.traces]
    fig = Figure()
    ax = fig.add_subplot(111)
    if spec.kind == "series":
        _render_series(ax, spec, traces)
    else:
        _render_slopes(ax, spec, traces)
    if spec.title:
        ax.set_title(spec.title)
    if spec.legend:
        handles, _ = ax.get_legend_handles_labels()
        if handles:
            ax.legend()
    return fig


def build_figure(spec: FigureSpec) -> Figure:
    """Build (but do not save) the figure for a spec, under the pinned style."""
    with mpl.rc_context(PINNED_RCPARAMS):
        return _build(spec)


def render_figure(spec: FigureSpec) -> Path:
    """Build the figure and write it to ``spec.out``; returns the output path."""
    with mpl.rc_context(PINNED_RCPARAMS):
        fig = _build(spec)
        spec.out.parent.mkdir(parents=True, exist_ok=True)
        suffix = spec.out.suffix.lower()
        if suffix == ".png":
            fig.savefig(spec.out, format="png", metadata={"Software": _SOFTWARE})
        else:
            fig.savefig(
                spec.out,
                format="pdf",
                metadata={
                    "Creator": _SOFTWARE,
                    "Producer": _SOFTWARE,
                    "CreationDate": None,
                },
            )
    return spec.out
