"""Per-iteration traces and their on-disk CSV format.

Trace CSV contract (consumed by the harness, the slope fitter and any
external tooling): UTF-8, LF line endings, header exactly

    t,grad_true,grad_est,grad_avg,m_norm,oracle_ul,oracle_ll,oracle_cross,oracle_gen,elapsed_s

one row per outer iteration t = 1..T, floats rendered with %.17g (full
double round-trip), counters as integers.  ``grad_true`` is the true
hypergradient norm at the pre-update iterate (NaN when the instance has no
closed form), ``grad_avg`` its running average (falling back to the running
average of ``grad_est`` when no closed form exists), ``m_norm`` the
momentum/direction norm and the oracle_* columns cumulative stochastic
oracle call counts.  ``elapsed_s`` is wall-clock and is the only column
exempt from determinism guarantees.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = ["TRACE_COLUMNS", "IterateTrace", "write_trace_csv", "read_trace_csv"]

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

_INT_COLUMNS = ("t", "oracle_ul", "oracle_ll", "oracle_cross", "oracle_gen")


@dataclass
class IterateTrace:
    """Column-major per-iteration record of one run.

    Beyond the CSV columns, in-memory traces optionally carry the raw
    estimator sample vectors (``samples``), the upper objective values
    (``f_val``, populated when runs record them) and run metadata
    (problem/algo identifiers, final iterates) in ``meta``.
    """

    t: np.ndarray
    grad_true: np.ndarray
    grad_est: np.ndarray
    grad_avg: np.ndarray
    m_norm: np.ndarray
    oracle_ul: np.ndarray
    oracle_ll: np.ndarray
    oracle_cross: np.ndarray
    oracle_gen: np.ndarray
    elapsed_s: np.ndarray
    f_val: Optional[np.ndarray] = None
    samples: Optional[list] = None
    xs: Optional[list] = None
    ys: Optional[list] = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def final_avg(self) -> float:
        return float(self.grad_avg[-1])

    @property
    def best_avg(self) -> float:
        return float(np.min(self.grad_avg))

    @property
    def oracle_total(self) -> int:
        return int(
            self.oracle_ul[-1]
            + self.oracle_ll[-1]
            + self.oracle_cross[-1]
            + self.oracle_gen[-1]
        )

    def column(self, name: str) -> np.ndarray:
        if name not in TRACE_COLUMNS:
            raise KeyError(name)
        return getattr(self, name)

    def write_csv(self, path) -> None:
        write_trace_csv(self, path)


class _TraceBuilder:
    """Row-by-row accumulator used by the run loops."""

    def __init__(self, record_f: bool = False, keep_samples: bool = True):
        self.rows = {name: [] for name in TRACE_COLUMNS}
        self.f_val: Optional[list] = [] if record_f else None
        self.samples: Optional[list] = [] if keep_samples else None
        self.xs: Optional[list] = [] if keep_samples else None
        self.ys: Optional[list] = [] if keep_samples else None
        self._true_sum = 0.0
        self._est_sum = 0.0
        self._have_truth = True

    def add(
        self,
        t: int,
        grad_true: float,
        grad_est: float,
        m_norm: float,
        counters,
        elapsed_s: float,
        f_val: Optional[float] = None,
        sample: Optional[np.ndarray] = None,
        x: Optional[np.ndarray] = None,
        y: Optional[np.ndarray] = None,
    ) -> None:
        if np.isnan(grad_true):
            self._have_truth = False
        else:
            self._true_sum += grad_true
        self._est_sum += grad_est
        avg = (self._true_sum if self._have_truth else self._est_sum) / t
        r = self.rows
        r["t"].append(t)
        r["grad_true"].append(grad_true)
        r["grad_est"].append(grad_est)
        r["grad_avg"].append(avg)
        r["m_norm"].append(m_norm)
        r["oracle_ul"].append(counters.ul)
        r["oracle_ll"].append(counters.ll)
        r["oracle_cross"].append(counters.cross)
        r["oracle_gen"].append(counters.gen)
        r["elapsed_s"].append(elapsed_s)
        if self.f_val is not None:
            self.f_val.append(np.nan if f_val is None else f_val)
        if self.samples is not None:
            self.samples.append(None if sample is None else np.array(sample))
        if self.xs is not None:
            self.xs.append(None if x is None else np.array(x))
        if self.ys is not None:
            self.ys.append(None if y is None else np.array(y))

    def build(self, meta: dict) -> IterateTrace:
        cols = {}
        for name in TRACE_COLUMNS:
            dtype = int if name in _INT_COLUMNS else float
            cols[name] = np.asarray(self.rows[name], dtype=dtype)
        return IterateTrace(
            **cols,
            f_val=None if self.f_val is None else np.asarray(self.f_val, dtype=float),
            samples=self.samples,
            xs=self.xs,
            ys=self.ys,
            meta=meta,
        )


def _fmt(name: str, value) -> str:
    if name in _INT_COLUMNS:
        return str(int(value))
    return "%.17g" % float(value)


def write_trace_csv(trace: IterateTrace, path) -> None:
    """Write a trace in the documented CSV contract."""
    lines = [",".join(TRACE_COLUMNS)]
    n = len(trace)
    for i in range(n):
        lines.append(
            ",".join(_fmt(name, trace.column(name)[i]) for name in TRACE_COLUMNS)
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trace_csv(path) -> IterateTrace:
    """Read a trace CSV (columns only; no metadata survives the format)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header.split(",") != list(TRACE_COLUMNS):
            raise ValueError(f"{path}: unexpected trace header {header!r}")
        raw = np.loadtxt(fh, delimiter=",", ndmin=2)
    if raw.size == 0:
        raw = raw.reshape(0, len(TRACE_COLUMNS))
    cols = {}
    for j, name in enumerate(TRACE_COLUMNS):
        dtype = int if name in _INT_COLUMNS else float
        cols[name] = raw[:, j].astype(dtype)
    return IterateTrace(**cols, meta={"path": str(path)})
