"""Readers for the published unibio run artifacts.

This package deliberately does not import ``unibio``.  Everything it
knows about run outputs is the *published file contract*, restated here:

- **Trace CSV**: UTF-8, LF line endings, header exactly

  ``t,grad_true,grad_est,grad_avg,m_norm,oracle_ul,oracle_ll,oracle_cross,oracle_gen,elapsed_s``

  with one row per outer iteration.  Floats are plain decimal (``nan``
  spelled out where no value exists, e.g. ``grad_true`` for problems
  without a closed-form hypergradient); oracle counters are cumulative
  integers.

- **Filename convention**: one trace per seed, named
  ``<problem>_p<p>_<algo>_seed<seed>.csv`` where ``p`` is formatted with
  ``%g`` (so ``p2``, ``p2.5``, ...).

The virtual column ``oracle_total`` (sum of the four oracle counters) is
accepted anywhere a column name is, since cost-normalized plots are the
main reason the counters exist.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "TRACE_COLUMNS",
    "VIRTUAL_COLUMNS",
    "LogLogFit",
    "TraceFile",
    "default_labels",
    "fit_loglog",
    "parse_trace_name",
    "read_trace",
]

TRACE_COLUMNS = (
    "t",
    "grad_true",
    "grad_est",
    "grad_avg",
    "m_norm",
    "oracle_ul",
    "oracle_ll",
    "oracle_cross",
    "oracle_gen",
    "elapsed_s",
)

_ORACLE_COLUMNS = ("oracle_ul", "oracle_ll", "oracle_cross", "oracle_gen")

VIRTUAL_COLUMNS = ("oracle_total",)

_NAME_RE = re.compile(
    r"^(?P<problem>.+)_p(?P<p>[0-9]+(?:\.[0-9]+)?(?:e-?[0-9]+)?)"
    r"_(?P<algo>[A-Za-z0-9]+)_seed(?P<seed>[0-9]+)$"
)


def parse_trace_name(name: str) -> tuple[str, float, str, int]:
    """Split a trace filename (or stem) into ``(problem, p, algo, seed)``.

    Raises ``ValueError`` if the name does not follow the convention.
    """
    stem = name[:-4] if name.endswith(".csv") else name
    match = _NAME_RE.match(stem)
    if match is None:
        raise ValueError(
            f"trace name {name!r} does not match "
            "'<problem>_p<p>_<algo>_seed<seed>.csv'"
        )
    return (
        match.group("problem"),
        float(match.group("p")),
        match.group("algo"),
        int(match.group("seed")),
    )


@dataclass(frozen=True)
class TraceFile:
    """One parsed trace CSV plus the metadata encoded in its filename."""

    path: Path
    problem: str
    p: float
    algo: str
    seed: int
    data: dict[str, np.ndarray]

    def column(self, name: str) -> np.ndarray:
        if name == "oracle_total":
            return sum(self.data[c] for c in _ORACLE_COLUMNS)
        if name not in TRACE_COLUMNS:
            raise KeyError(
                f"unknown trace column {name!r}; expected one of "
                f"{TRACE_COLUMNS + VIRTUAL_COLUMNS}"
            )
        return self.data[name]

    def __len__(self) -> int:
        return len(self.data["t"])


def read_trace(path: str | Path) -> TraceFile:
    """Read one trace CSV, validating the published header exactly."""
    path = Path(path)
    problem, p, algo, seed = parse_trace_name(path.name)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header.split(",") != list(TRACE_COLUMNS):
            raise ValueError(f"{path}: unexpected trace header {header!r}")
        raw = np.loadtxt(fh, delimiter=",", ndmin=2, dtype=float)
    if raw.size == 0:
        raw = raw.reshape(0, len(TRACE_COLUMNS))
    if raw.shape[1] != len(TRACE_COLUMNS):
        raise ValueError(
            f"{path}: expected {len(TRACE_COLUMNS)} columns, got {raw.shape[1]}"
        )
    data = {name: raw[:, j].copy() for j, name in enumerate(TRACE_COLUMNS)}
    return TraceFile(path=path, problem=problem, p=p, algo=algo, seed=seed, data=data)


@dataclass(frozen=True)
class LogLogFit:
    """Least-squares line through ``(log x, log y)`` over a window."""

    slope: float
    intercept: float
    r2: float
    n: int


def fit_loglog(
    x: np.ndarray,
    y: np.ndarray,
    window: tuple[float, float] | None = None,
) -> LogLogFit:
    """Fit ``log y ~ slope * log x + intercept`` on the points inside ``window``.

    Points with nonfinite or nonpositive coordinates are dropped (they
    have no logarithm); the window is inclusive on both ends and
    defaults to the full range.  At least 10 usable points are required.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"x and y have different lengths: {x.size} vs {y.size}")
    keep = np.isfinite(x) & np.isfinite(y) & (x > 0.0) & (y > 0.0)
    if window is not None:
        lo, hi = window
        keep &= (x >= lo) & (x <= hi)
    x, y = x[keep], y[keep]
    if x.size < 10:
        raise ValueError(
            f"insufficient points for a slope fit: {x.size} usable, need >= 10"
        )
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_res = float(resid @ resid)
    centered = ly - ly.mean()
    ss_tot = float(centered @ centered)
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return LogLogFit(slope=float(slope), intercept=float(intercept), r2=r2, n=int(x.size))


def default_labels(traces: list[TraceFile]) -> list[str]:
    """Concise legend labels: only the metadata fields that vary.

    With one trace per ``p`` this yields ``p=2, p=4, ...``; with one per
    seed, ``seed 0, seed 1, ...``.  Falls back to filename stems when
    nothing varies (duplicate inputs) or everything does.
    """
    fields = [
        ("problem", [t.problem for t in traces]),
        ("p", [f"p={t.p:g}" for t in traces]),
        ("algo", [t.algo for t in traces]),
        ("seed", [f"seed {t.seed}" for t in traces]),
    ]
    varying = [vals for _, vals in fields if len(set(vals)) > 1]
    if not varying:
        return [t.path.stem for t in traces]
    labels = [" ".join(parts) for parts in zip(*varying)]
    if len(set(labels)) != len(labels):
        return [t.path.stem for t in traces]
    return labels
