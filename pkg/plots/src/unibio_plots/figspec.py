"""Figure-spec files: what to draw, from which traces, to which file.

A figure spec is a UTF-8 text file of ``key = value`` lines (``#``
starts a comment, blank lines are ignored), the same shape as a unibio
run config.  Unknown keys are hard errors with a did-you-mean
suggestion.  The keys:

=================  =========  ====================================================
key                default    meaning
=================  =========  ====================================================
``kind``           series     ``series`` (one curve per trace) or ``slopes``
                              (fitted log-log slope per trace, plotted against p)
``out``            required   output image path (``.png`` or ``.pdf``), relative
                              to the spec file
``traces``         required   comma-separated trace CSV paths and/or glob
                              patterns, relative to the spec file; glob matches
                              are sorted lexicographically
``labels``         auto       comma-separated legend labels, one per trace
                              (default: the varying filename fields, e.g. ``p=2``)
``column``         grad_avg   trace column on the y axis / being fitted
``x``              t          trace column on the x axis (``oracle_total`` sums
                              the four oracle counters)
``loglog``         true       log-log axes for ``series`` figures
``title``          empty      figure title
``xlabel``         auto       x-axis label override
``ylabel``         auto       y-axis label override
``window``         full       inclusive ``lo:hi`` fit window on the x column,
                              used by slope overlays and ``slopes`` figures
``overlay_slopes`` false      dash a fitted guide line over each series curve
                              and append the slope to its legend label
``legend``         true       draw the legend
=================  =========  ====================================================
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass
from pathlib import Path

from .traces import TRACE_COLUMNS, VIRTUAL_COLUMNS

__all__ = ["FigSpecError", "FigureSpec", "parse_figspec", "parse_figspec_file"]

_KINDS = ("series", "slopes")
_OUT_SUFFIXES = (".png", ".pdf")
_COLUMN_CHOICES = TRACE_COLUMNS + VIRTUAL_COLUMNS

_DEFAULTS: dict[str, str] = {
    "kind": "series",
    "out": "",
    "traces": "",
    "labels": "",
    "column": "grad_avg",
    "x": "t",
    "loglog": "true",
    "title": "",
    "xlabel": "",
    "ylabel": "",
    "window": "",
    "overlay_slopes": "false",
    "legend": "true",
}

_GLOB_CHARS = set("*?[")


class FigSpecError(ValueError):
    """A figure-spec file could not be parsed or validated."""


@dataclass(frozen=True)
class FigureSpec:
    """A fully resolved figure spec (paths absolute, values typed)."""

    kind: str
    out: Path
    traces: tuple[Path, ...]
    labels: tuple[str, ...]
    column: str
    x: str
    loglog: bool
    title: str
    xlabel: str
    ylabel: str
    window: tuple[float, float] | None
    overlay_slopes: bool
    legend: bool


def _parse_bool(raw: str, key: str, where: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise FigSpecError(f"{where}: {key} expects a boolean, got {raw!r}")


def _parse_window(raw: str, where: str) -> tuple[float, float]:
    parts = raw.split(":")
    if len(parts) != 2:
        raise FigSpecError(f"{where}: window expects 'lo:hi', got {raw!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise FigSpecError(f"{where}: window expects 'lo:hi', got {raw!r}") from None
    if not (lo > 0.0 and hi > lo):
        raise FigSpecError(
            f"{where}: window needs 0 < lo < hi (log axis), got {lo:g}:{hi:g}"
        )
    return (lo, hi)


def _split_list(raw: str) -> list[str]:
    return [token.strip() for token in raw.split(",") if token.strip()]


def _resolve_traces(raw: str, base: Path, where: str) -> tuple[Path, ...]:
    tokens = _split_list(raw)
    if not tokens:
        raise FigSpecError(f"{where}: 'traces' is required and may not be empty")
    paths: list[Path] = []
    for token in tokens:
        if _GLOB_CHARS & set(token):
            anchor = Path(token)
            if anchor.is_absolute():
                matches = sorted(anchor.parent.glob(anchor.name), key=str)
            else:
                matches = sorted(base.glob(token), key=str)
            if not matches:
                raise FigSpecError(f"{where}: pattern {token!r} matched no files")
            paths.extend(matches)
        else:
            path = Path(token)
            paths.append(path if path.is_absolute() else base / token)
    return tuple(paths)


def parse_figspec(text: str, base_dir: str | Path = ".", name: str = "<figspec>") -> FigureSpec:
    """Parse figure-spec text into a validated :class:`FigureSpec`.

    Relative paths in ``out`` and ``traces`` are resolved against
    ``base_dir`` (the spec file's directory when loaded from disk).
    """
    base = Path(base_dir)
    values = dict(_DEFAULTS)
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        where = f"{name}:{lineno}"
        if "=" not in stripped:
            raise FigSpecError(f"{where}: expected 'key = value', got {line.strip()!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _DEFAULTS:
            hint = ""
            close = difflib.get_close_matches(key, _DEFAULTS, n=1)
            if close:
                hint = f" (did you mean {close[0]!r}?)"
            raise FigSpecError(f"{where}: unknown key {key!r}{hint}")
        values[key] = raw

    where = name
    kind = values["kind"].strip().lower()
    if kind not in _KINDS:
        raise FigSpecError(f"{where}: kind must be one of {_KINDS}, got {values['kind']!r}")

    if not values["out"].strip():
        raise FigSpecError(f"{where}: 'out' is required and may not be empty")
    out = Path(values["out"].strip())
    if not out.is_absolute():
        out = base / out
    if out.suffix.lower() not in _OUT_SUFFIXES:
        raise FigSpecError(
            f"{where}: out must end in one of {_OUT_SUFFIXES}, got {out.name!r}"
        )

    traces = _resolve_traces(values["traces"], base, where)
    labels = tuple(_split_list(values["labels"]))
    if labels and len(labels) != len(traces):
        raise FigSpecError(
            f"{where}: got {len(labels)} labels for {len(traces)} traces"
        )

    for axis_key in ("column", "x"):
        if values[axis_key].strip() not in _COLUMN_CHOICES:
            raise FigSpecError(
                f"{where}: {axis_key} must be one of {_COLUMN_CHOICES}, "
                f"got {values[axis_key]!r}"
            )

    window = None
    if values["window"].strip():
        window = _parse_window(values["window"].strip(), where)

    loglog = _parse_bool(values["loglog"], "loglog", where)
    overlay = _parse_bool(values["overlay_slopes"], "overlay_slopes", where)
    if kind == "series" and overlay and not loglog:
        raise FigSpecError(
            f"{where}: overlay_slopes draws log-log fits and requires loglog = true"
        )

    return FigureSpec(
        kind=kind,
        out=out,
        traces=traces,
        labels=labels,
        column=values["column"].strip(),
        x=values["x"].strip(),
        loglog=loglog,
        title=values["title"].strip(),
        xlabel=values["xlabel"].strip(),
        ylabel=values["ylabel"].strip(),
        window=window,
        overlay_slopes=overlay,
        legend=_parse_bool(values["legend"], "legend", where),
    )


def parse_figspec_file(path: str | Path) -> FigureSpec:
    """Load and parse a figure-spec file; paths resolve against its directory."""
    path = Path(path)
    return parse_figspec(path.read_text(encoding="utf-8"), path.parent, str(path))
