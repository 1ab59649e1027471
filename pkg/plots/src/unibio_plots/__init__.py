"""Deterministic figures from unibio run artifacts.

This package consumes only the published file formats — trace CSVs,
``summary.jsonl`` and the ``<problem>_p<p>_<algo>_seed<seed>.csv``
filename convention — and never imports the ``unibio`` package itself,
so it can be installed and versioned independently of the solver
library (and the solver's test suite runs without this package).
"""

from .figspec import FigSpecError, FigureSpec, parse_figspec, parse_figspec_file
from .render import PINNED_RCPARAMS, build_figure, render_figure
from .traces import (
    TRACE_COLUMNS,
    LogLogFit,
    TraceFile,
    default_labels,
    fit_loglog,
    parse_trace_name,
    read_trace,
)

__version__ = "0.1.0"

__all__ = [
    "FigSpecError",
    "FigureSpec",
    "LogLogFit",
    "PINNED_RCPARAMS",
    "TRACE_COLUMNS",
    "TraceFile",
    "build_figure",
    "default_labels",
    "fit_loglog",
    "parse_figspec",
    "parse_figspec_file",
    "parse_trace_name",
    "read_trace",
    "render_figure",
]
