"""Figure-pipeline tests for the unibio-plots package.

Acceptance criterion A10 lives here (the solver's acceptance table in
``tests/test_acceptance.py`` points at this file):

    rendering the deterministic p-sweep traces produces a four-curve
    series figure and a slopes figure without error, and re-rendering
    either one is byte-identical under the pinned style.

Fixture traces are produced by invoking the solver CLI in a subprocess;
this package never imports the solver — it consumes only the published
trace-CSV format and filename convention (that isolation is itself
asserted below).
"""

import dataclasses
import subprocess
import sys
import textwrap
from pathlib import Path

import numpy as np
import pytest

pytest.importorskip("matplotlib")

from unibio_plots import (
    FigSpecError,
    build_figure,
    fit_loglog,
    parse_figspec,
    parse_figspec_file,
    parse_trace_name,
    read_trace,
    render_figure,
)
from unibio_plots.cli import main as cli_main

# The catalogued deterministic p-sweep: upper step size per degree p.
SWEEP_ETAS = {2: 0.05, 4: 0.03, 6: 0.02, 8: 0.01}
SWEEP_T = 500

_CFG_TEMPLATE = """\
problem.id = ex3
problem.p = {p}
algo.name = unibio
algo.eta_ul = {eta}
algo.beta = 0.9
algo.interval = 2
algo.q = 10
algo.eta_ll = 1.0
algo.warm_t1 = 5
algo.warm_d1 = 1
algo.warm_budget = 100
algo.refresh_t1 = 5
algo.refresh_d1 = 1
algo.refresh_budget = 100
run.t = {t}
run.seeds = 1
run.out = {out}
"""


# ---------------------------------------------------------------------------
# file-format units
# ---------------------------------------------------------------------------


def test_trace_name_parses_convention():
    assert parse_trace_name("ex3_p2_unibio_seed0.csv") == ("ex3", 2.0, "unibio", 0)
    assert parse_trace_name("ex4_p2.5_ttsa_seed41") == ("ex4", 2.5, "ttsa", 41)
    assert parse_trace_name("hypercleaning_p3_masoba_seed7.csv") == (
        "hypercleaning",
        3.0,
        "masoba",
        7,
    )


@pytest.mark.parametrize(
    "bad", ["summary.jsonl", "ex3_unibio_seed0.csv", "ex3_p2_unibio.csv", "ex3_p2_seed0.csv"]
)
def test_trace_name_rejects_nonconforming(bad):
    with pytest.raises(ValueError, match="does not match"):
        parse_trace_name(bad)


def test_read_trace_roundtrips_small_file(tmp_path):
    path = tmp_path / "ex3_p2_unibio_seed3.csv"
    path.write_text(
        "t,grad_true,grad_est,grad_avg,m_norm,oracle_ul,oracle_ll,"
        "oracle_cross,oracle_gen,elapsed_s\n"
        "1,0.5,0.55,0.55,1,2,100,1,10,0.01\n"
        "2,nan,0.25,0.4,1,4,100,2,20,0.02\n"
    )
    trace = read_trace(path)
    assert (trace.problem, trace.p, trace.algo, trace.seed) == ("ex3", 2.0, "unibio", 3)
    assert len(trace) == 2
    np.testing.assert_array_equal(trace.column("t"), [1.0, 2.0])
    assert np.isnan(trace.column("grad_true")[1])
    np.testing.assert_array_equal(trace.column("oracle_total"), [113.0, 126.0])
    with pytest.raises(KeyError, match="unknown trace column"):
        trace.column("grad_typo")


def test_read_trace_rejects_wrong_header(tmp_path):
    path = tmp_path / "ex3_p2_unibio_seed0.csv"
    path.write_text("t,grad_true\n1,0.5\n")
    with pytest.raises(ValueError, match="unexpected trace header"):
        read_trace(path)


def test_fit_loglog_recovers_exact_power_law():
    t = np.arange(1, 201, dtype=float)
    fit = fit_loglog(t, 3.0 * t**-0.5)
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert fit.intercept == pytest.approx(np.log(3.0), abs=1e-12)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert fit.n == 200
    # inclusive window, and nonpositive/NaN points are dropped, not fatal
    y = 3.0 * t**-0.5
    y[:5] = np.nan
    windowed = fit_loglog(t, y, window=(10.0, 20.0))
    assert windowed.n == 11
    assert windowed.slope == pytest.approx(-0.5, abs=1e-12)


def test_fit_loglog_insufficient_points():
    t = np.arange(1.0, 10.0)  # nine points
    with pytest.raises(ValueError, match="insufficient points"):
        fit_loglog(t, 1.0 / t)


# ---------------------------------------------------------------------------
# figspec units
# ---------------------------------------------------------------------------


def _spec_text(**over):
    lines = {"kind": "series", "out": "fig.png", "traces": "ex3_p2_unibio_seed0.csv"}
    lines.update(over)
    return "\n".join(f"{k} = {v}" for k, v in lines.items() if v is not None)


def test_figspec_defaults_and_comments(tmp_path):
    (tmp_path / "ex3_p2_unibio_seed0.csv").touch()
    text = "# a figure\n\n" + _spec_text() + "\n# trailing comment\n"
    spec = parse_figspec(text, tmp_path)
    assert spec.kind == "series"
    assert spec.out == tmp_path / "fig.png"
    assert spec.traces == (tmp_path / "ex3_p2_unibio_seed0.csv",)
    assert spec.labels == ()
    assert (spec.column, spec.x) == ("grad_avg", "t")
    assert spec.loglog and spec.legend and not spec.overlay_slopes
    assert spec.window is None and spec.title == ""


def test_figspec_unknown_key_suggests():
    with pytest.raises(FigSpecError, match=r"unknown key 'colum'.*did you mean 'column'"):
        parse_figspec(_spec_text(colum="grad_avg"))


@pytest.mark.parametrize(
    "over, message",
    [
        (dict(kind="scatter"), "kind must be one of"),
        (dict(out="fig.svg"), "out must end in"),
        (dict(out=""), "'out' is required"),
        (dict(traces=""), "'traces' is required"),
        (dict(labels="a, b"), "got 2 labels for 1 traces"),
        (dict(column="grad_typo"), "column must be one of"),
        (dict(window="5"), "window expects 'lo:hi'"),
        (dict(window="10:2"), "0 < lo < hi"),
        (dict(loglog="maybe"), "expects a boolean"),
        (dict(loglog="false", overlay_slopes="true"), "requires loglog = true"),
    ],
)
def test_figspec_rejects_bad_values(over, message):
    with pytest.raises(FigSpecError, match=message):
        parse_figspec(_spec_text(**over))


def test_figspec_malformed_line_has_location():
    with pytest.raises(FigSpecError, match=r"<figspec>:2: expected 'key = value'"):
        parse_figspec("kind = series\nnonsense\n")


def test_figspec_glob_must_match(tmp_path):
    with pytest.raises(FigSpecError, match="matched no files"):
        parse_figspec(_spec_text(traces="missing_p*_unibio_seed0.csv"), tmp_path)


# ---------------------------------------------------------------------------
# isolation from the solver package
# ---------------------------------------------------------------------------


def test_package_never_imports_solver():
    code = (
        "import sys\n"
        "import unibio_plots, unibio_plots.cli, unibio_plots.figspec, "
        "unibio_plots.render, unibio_plots.traces\n"
        "assert 'unibio' not in sys.modules, 'unibio was imported'\n"
    )
    subprocess.run([sys.executable, "-c", code], check=True)


# ---------------------------------------------------------------------------
# A10: the p-sweep figures
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def sweep_traces(tmp_path_factory):
    """Deterministic p-sweep traces, generated through the solver CLI."""
    root = tmp_path_factory.mktemp("sweep")
    out = root / "traces"
    for p, eta in sorted(SWEEP_ETAS.items()):
        cfg = root / f"p{p}.cfg"
        cfg.write_text(_CFG_TEMPLATE.format(p=p, eta=eta, t=SWEEP_T, out=out))
        result = subprocess.run(
            [sys.executable, "-m", "unibio.harness", "run", str(cfg)],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0, result.stderr
    names = sorted(f.name for f in out.glob("*.csv"))
    assert names == [f"ex3_p{p}_unibio_seed0.csv" for p in sorted(SWEEP_ETAS)]
    return out


def _write_series_spec(directory, traces_dir, out_name="p_sweep.png"):
    spec = directory / "p_sweep.figspec"
    spec.write_text(
        textwrap.dedent(
            f"""\
            kind           = series
            out            = figures/{out_name}
            traces         = {traces_dir}/ex3_p*_unibio_seed0.csv
            column         = grad_avg
            loglog         = true
            overlay_slopes = true
            window         = 1:{SWEEP_T}
            title          = deterministic p-sweep
            """
        )
    )
    return spec


def _write_slopes_spec(directory, traces_dir):
    spec = directory / "p_slopes.figspec"
    spec.write_text(
        textwrap.dedent(
            f"""\
            kind   = slopes
            out    = figures/p_slopes.png
            traces = {traces_dir}/ex3_p*_unibio_seed0.csv
            window = 1:{SWEEP_T}
            """
        )
    )
    return spec


def test_a10_series_figure_has_four_labeled_curves(sweep_traces, tmp_path):
    spec = parse_figspec_file(_write_series_spec(tmp_path, sweep_traces))
    fig = build_figure(spec)
    ax = fig.axes[0]
    solid = [line for line in ax.lines if line.get_linestyle() == "-"]
    dashed = [line for line in ax.lines if line.get_linestyle() == "--"]
    assert len(solid) == 4 and len(dashed) == 4
    for line, p in zip(solid, sorted(SWEEP_ETAS)):
        assert line.get_label().startswith(f"p={p} (slope ")
        assert len(line.get_xdata()) == SWEEP_T
    assert (ax.get_xscale(), ax.get_yscale()) == ("log", "log")
    assert ax.get_legend() is not None


def test_a10_slopes_figure_matches_direct_fits(sweep_traces, tmp_path):
    spec = parse_figspec_file(_write_slopes_spec(tmp_path, sweep_traces))
    fig = build_figure(spec)
    ax = fig.axes[0]
    (line,) = ax.lines
    np.testing.assert_array_equal(line.get_xdata(), sorted(SWEEP_ETAS))
    expected = [
        fit_loglog(
            read_trace(sweep_traces / f"ex3_p{p}_unibio_seed0.csv").column("t"),
            read_trace(sweep_traces / f"ex3_p{p}_unibio_seed0.csv").column("grad_avg"),
            window=(1.0, float(SWEEP_T)),
        ).slope
        for p in sorted(SWEEP_ETAS)
    ]
    np.testing.assert_allclose(line.get_ydata(), expected, rtol=0, atol=1e-12)
    # decay degrades honestly with p: slopes negative, magnitudes non-increasing
    assert all(s < 0 for s in expected)
    assert np.all(np.diff(expected) > 0)
    assert expected[0] < -0.5 and expected[-1] > -0.15


def test_a10_renders_are_byte_identical(sweep_traces, tmp_path, capsys):
    series = _write_series_spec(tmp_path, sweep_traces)
    slopes = _write_slopes_spec(tmp_path, sweep_traces)
    assert cli_main(["plot", str(series), str(slopes)]) == 0
    out_lines = capsys.readouterr().out.strip().splitlines()
    assert len(out_lines) == 2 and all(line.startswith("wrote ") for line in out_lines)

    for name in ("p_sweep.png", "p_slopes.png"):
        path = tmp_path / "figures" / name
        first = path.read_bytes()
        assert first[:8] == b"\x89PNG\r\n\x1a\n" and len(first) > 10_000
        cli_main(["plot", str(series), str(slopes)])
        assert path.read_bytes() == first, f"{name}: re-render differs"


def test_a10_pdf_render_is_byte_identical(sweep_traces, tmp_path):
    spec = parse_figspec_file(_write_series_spec(tmp_path, sweep_traces))
    spec = dataclasses.replace(spec, out=tmp_path / "figures" / "p_sweep.pdf")
    first = render_figure(spec).read_bytes()
    assert first[:5] == b"%PDF-"
    assert b"CreationDate" not in first
    second = render_figure(spec).read_bytes()
    assert second == first


def test_cli_reports_bad_spec(tmp_path, capsys):
    bad = tmp_path / "bad.figspec"
    bad.write_text("kind = scatter\nout = fig.png\ntraces = x.csv\n")
    assert cli_main(["plot", str(bad)]) == 1
    assert "kind must be one of" in capsys.readouterr().err

    assert cli_main(["plot", str(tmp_path / "missing.figspec")]) == 1
    assert "error" in capsys.readouterr().err
