"""Command line interface: ``unibio-plots plot <figure-spec-file> [...]``."""

from __future__ import annotations

import argparse
import sys

from .figspec import FigSpecError, parse_figspec_file
from .render import render_figure

__all__ = ["main"]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="unibio-plots",
        description="Render deterministic figures from unibio trace files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_plot = sub.add_parser("plot", help="render one figure per spec file")
    p_plot.add_argument("spec", nargs="+", help="figure-spec file(s)")
    args = parser.parse_args(argv)

    for spec_path in args.spec:
        try:
            spec = parse_figspec_file(spec_path)
            out = render_figure(spec)
        except (FigSpecError, OSError, ValueError) as exc:
            print(f"unibio-plots: error: {exc}", file=sys.stderr)
            return 1
        print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
