"""Experiment harness: config files, seeded parallel runs, trace/summary
files, slope fitting, and the command-line interface.

Config file format: UTF-8 text, one ``section.key = value`` pair per line,
``#`` starts a comment, blank lines ignored.  Every key has a default, so
the empty file is a valid config; unknown keys are hard errors with a
did-you-mean suggestion.  Sections: ``problem`` (instance selection),
``algo`` (method and hyperparameters), ``run`` (budget, seeds, output
directory, parallelism, fit window).

Outputs of ``run``: one trace CSV per seed named
``<problem>_p<p>_<algo>_seed<seed>.csv`` (see :mod:`unibio.trace` for the
column contract) plus ``summary.jsonl`` with one JSON record per run:
keys ``problem, p, algo, seed, final_avg, best_avg, slope, oracle_total,
wall_s`` (``slope`` is null when the trace is too short to fit).

CLI:
    unibio run <config> [--out DIR]
    unibio slope <trace.csv> [--window LO:HI]
    unibio list-problems
"""

from __future__ import annotations

import argparse
import difflib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .baselines import BASELINE_IDS, BaselineConfig, run_baseline
from .epoch_sgd import EpochConfig
from .problem_model import make_example, make_hypercleaning
from .trace import IterateTrace, read_trace_csv, write_trace_csv
from .unibio import UniBiOConfig, theory_schedule, unibio_run

__all__ = [
    "ConfigError",
    "parse_config",
    "load_config",
    "CONFIG_SCHEMA",
    "build_problem",
    "run_single",
    "run_experiment",
    "SlopeFit",
    "fit_loglog_slope",
    "read_trace_csv",
    "main",
]


class ConfigError(ValueError):
    """Malformed or unknown configuration input."""


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_floatlist(s: str):
    s = s.strip()
    if not s or s.lower() == "auto":
        return None
    return [float(part) for part in s.split(",")]


# key -> (parser, default).  None defaults mean "derive at build time".
CONFIG_SCHEMA = {
    "problem.id": (str, "ex3"),
    "problem.p": (float, 2.0),
    "problem.dim": (int, 1),
    "problem.n": (int, 200),
    "problem.d": (int, 20),
    "problem.flip_prob": (float, 0.1),
    "problem.reg_c": (float, 0.01),
    "problem.data_seed": (int, 0),
    "problem.floor": (float, 0.05),
    "problem.sigma_f": (float, 0.0),
    "problem.sigma_g1": (float, 0.0),
    "problem.sigma_g2": (float, 0.0),
    "problem.x0": (_parse_floatlist, None),
    "problem.y0": (_parse_floatlist, None),
    "algo.name": (str, "unibio"),
    "algo.mode": (str, "practical"),
    "algo.eta_ul": (float, 0.02),
    "algo.eta_ll": (float, 1.0),
    "algo.beta": (float, 0.9),
    "algo.interval": (int, 2),
    "algo.q": (int, 10),
    "algo.inner_steps": (int, 5),
    "algo.eta_z": (float, 0.01),
    "algo.cap_c": (float, 0.0),
    "algo.warm_t1": (int, 5),
    "algo.warm_d1": (float, 1.0),
    "algo.warm_budget": (int, 100),
    "algo.refresh_t1": (int, 5),
    "algo.refresh_d1": (float, 1.0),
    "algo.refresh_budget": (int, 100),
    "algo.eps": (float, 0.3),
    "algo.delta": (float, 0.1),
    "algo.t_cap": (int, 10_000),
    "algo.k_cap": (int, 100_000),
    "algo.r0": (float, 0.0),
    "algo.c1": (float, 1.0),
    "algo.c2": (float, 1.0),
    "algo.big_c1": (float, 8.0),
    "run.t": (int, 500),
    "run.seeds": (int, 1),
    "run.seed_base": (int, 0),
    "run.out": (str, "runs"),
    "run.parallel": (int, 0),
    "run.fit_lo": (int, 0),
    "run.fit_hi": (int, 0),
    "run.record_f": (_parse_bool, False),
}

# Common key spellings mapped to the canonical bare key (consulted before
# fuzzy matching so e.g. "learningrate" reliably suggests "eta_ul").
_KEY_ALIASES = {
    "learningrate": "eta_ul",
    "learning_rate": "eta_ul",
    "lr": "eta_ul",
    "stepsize": "eta_ul",
    "step_size": "eta_ul",
    "eta": "eta_ul",
    "momentum": "beta",
    "iterations": "t",
    "iters": "t",
    "steps": "t",
    "algorithm": "name",
    "method": "name",
    "output": "out",
    "outdir": "out",
    "out_dir": "out",
    "workers": "parallel",
    "jobs": "parallel",
    "repeat": "seeds",
    "repeats": "seeds",
    "noise": "sigma_f",
    "sigma": "sigma_f",
}


def _suggest(key: str) -> str | None:
    section, _, bare = key.rpartition(".")
    candidates = list(CONFIG_SCHEMA)
    alias = _KEY_ALIASES.get(bare.lower())
    if alias is not None:
        if section and f"{section}.{alias}" in CONFIG_SCHEMA:
            return f"{section}.{alias}"
        for full in candidates:
            if full.endswith("." + alias):
                return full
    close = difflib.get_close_matches(key, candidates, n=1)
    if close:
        return close[0]
    bare_map = {k.split(".", 1)[1]: k for k in candidates}
    close = difflib.get_close_matches(bare, list(bare_map), n=1)
    if close:
        return bare_map[close[0]]
    return None


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse config text into a fully defaulted flat dict of dotted keys."""
    cfg = {key: default for key, (_, default) in CONFIG_SCHEMA.items()}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(
                f"{source}:{lineno}: expected 'section.key = value', got {raw!r}"
            )
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in CONFIG_SCHEMA:
            hint = _suggest(key)
            suffix = f"; did you mean '{hint}'?" if hint else ""
            raise ConfigError(f"{source}:{lineno}: unknown key '{key}'{suffix}")
        parser, _ = CONFIG_SCHEMA[key]
        try:
            cfg[key] = parser(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(
                f"{source}:{lineno}: bad value for '{key}': {exc}"
            ) from None
    return cfg


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), source=str(path))


def build_problem(cfg: dict):
    """Instantiate the problem described by a config dict."""
    pid = cfg["problem.id"]
    sigmas = {
        "sigma_f": cfg["problem.sigma_f"],
        "sigma_g1": cfg["problem.sigma_g1"],
        "sigma_g2": cfg["problem.sigma_g2"],
    }
    if pid == "hypercleaning":
        return make_hypercleaning(
            n=cfg["problem.n"],
            d=cfg["problem.d"],
            p=cfg["problem.p"],
            flip_prob=cfg["problem.flip_prob"],
            reg_c=cfg["problem.reg_c"],
            data_seed=cfg["problem.data_seed"],
            floor=cfg["problem.floor"],
            **sigmas,
        )
    p = cfg["problem.p"]
    if p != int(p):
        raise ConfigError(f"problem.p must be an integer for {pid}, got {p}")
    return make_example(pid, p=int(p), dim=cfg["problem.dim"], **sigmas)


def _init_point(spec, default: np.ndarray, dim: int, what: str) -> np.ndarray:
    if spec is None:
        return default
    arr = np.asarray(spec, dtype=float)
    if arr.size == 1:
        return np.full(dim, float(arr))
    if arr.size != dim:
        raise ConfigError(f"{what} has {arr.size} entries, expected {dim}")
    return arr


@dataclass(frozen=True)
class SlopeFit:
    """OLS fit of log(value) against log(t)."""

    slope: float
    intercept: float
    r_squared: float
    n_points: int
    window: tuple[int, int]


def fit_loglog_slope(t, values, window: tuple[int, int] | None = None) -> SlopeFit:
    """Fit log(values) ~ slope * log(t) + intercept over a t-window.

    ``window`` is an inclusive (lo, hi) pair on the iteration column; the
    default is [ceil(T/10), T].  Requires at least 10 points in the window
    and strictly positive values there.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    if t.shape != values.shape:
        raise ValueError("t and values must have matching shapes")
    if len(t) == 0:
        raise ValueError("empty trace")
    if window is None:
        hi = int(t[-1])
        window = (max(1, math.ceil(hi / 10.0)), hi)
    lo, hi = int(window[0]), int(window[1])
    mask = (t >= lo) & (t <= hi)
    n = int(np.count_nonzero(mask))
    if n < 10:
        raise ValueError(
            f"insufficient points for a slope fit: {n} in window [{lo}, {hi}], need >= 10"
        )
    tw = t[mask]
    vw = values[mask]
    if np.any(~np.isfinite(vw)) or np.any(vw <= 0.0):
        raise ValueError("values must be finite and strictly positive on the window")
    logt = np.log(tw)
    logv = np.log(vw)
    slope, intercept = np.polyfit(logt, logv, 1)
    pred = slope * logt + intercept
    ss_res = float(np.sum((logv - pred) ** 2))
    ss_tot = float(np.sum((logv - np.mean(logv)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return SlopeFit(
        slope=float(slope), intercept=float(intercept), r_squared=r2,
        n_points=n, window=(lo, hi),
    )


def _unibio_config_from(cfg: dict, problem) -> tuple[UniBiOConfig, int]:
    """UniBiO config + outer budget from a config dict (both modes)."""
    p = problem.constants.p
    if cfg["algo.mode"] == "theory":
        x0, y0 = _run_inits(cfg, problem)
        r0 = cfg["algo.r0"]
        if r0 <= 0.0:
            if problem.optimal_y is not None:
                r0 = float(np.linalg.norm(y0 - problem.optimal_y(x0)))
            else:
                r0 = 1.0
        schedule = theory_schedule(
            problem.constants,
            cfg["algo.eps"],
            cfg["algo.delta"],
            t_cap=cfg["algo.t_cap"],
            k_cap=cfg["algo.k_cap"],
            r0=max(r0, 1e-6),
            c1=cfg["algo.c1"],
            c2=cfg["algo.c2"],
            big_c1=cfg["algo.big_c1"],
        )
        return schedule.to_config(), schedule.t_outer
    if cfg["algo.mode"] != "practical":
        raise ConfigError(f"unknown algo.mode {cfg['algo.mode']!r}")
    warm = EpochConfig(
        gamma1=cfg["algo.eta_ll"], t1=cfg["algo.warm_t1"],
        d1=cfg["algo.warm_d1"], t_total=cfg["algo.warm_budget"], p=p,
    )
    refresh = EpochConfig(
        gamma1=cfg["algo.eta_ll"], t1=cfg["algo.refresh_t1"],
        d1=cfg["algo.refresh_d1"], t_total=cfg["algo.refresh_budget"], p=p,
    )
    return (
        UniBiOConfig(
            eta=cfg["algo.eta_ul"], beta=cfg["algo.beta"],
            interval=cfg["algo.interval"], q=cfg["algo.q"],
            warm=warm, refresh=refresh,
            cap_c=cfg["algo.cap_c"] or None,
        ),
        cfg["run.t"],
    )


def _run_inits(cfg: dict, problem) -> tuple[np.ndarray, np.ndarray]:
    dx0, dy0 = problem.default_init()
    x0 = _init_point(cfg["problem.x0"], dx0, problem.dx, "problem.x0")
    y0 = _init_point(cfg["problem.y0"], dy0, problem.dy, "problem.y0")
    return x0, y0


def _fit_window(cfg: dict, t_outer: int) -> tuple[int, int]:
    lo = cfg["run.fit_lo"] or max(1, math.ceil(t_outer / 10.0))
    hi = cfg["run.fit_hi"] or t_outer
    return (lo, hi)


def trace_filename(problem_name: str, p: float, algo: str, seed: int) -> str:
    return f"{problem_name}_p{p:g}_{algo}_seed{seed}.csv"


def run_single(cfg: dict, seed: int, out_dir: str | None = None) -> dict:
    """Execute one seeded run; write its trace CSV; return a summary record.

    Designed as a process-pool worker: the problem is rebuilt from the
    config inside the call, so only plain dicts cross process boundaries.
    """
    problem = build_problem(cfg)
    x0, y0 = _run_inits(cfg, problem)
    algo = cfg["algo.name"]
    wall0 = time.perf_counter()
    if algo == "unibio":
        ucfg, t_outer = _unibio_config_from(cfg, problem)
        trace = unibio_run(
            problem, ucfg, x0=x0, y0=y0, t_outer=t_outer, seed=seed,
            record_f=cfg["run.record_f"],
        )
    elif algo in BASELINE_IDS:
        bcfg = BaselineConfig(
            eta_ul=cfg["algo.eta_ul"], eta_ll=cfg["algo.eta_ll"],
            inner_steps=cfg["algo.inner_steps"], q=cfg["algo.q"],
            eta_z=cfg["algo.eta_z"], beta=cfg["algo.beta"],
            cap_c=cfg["algo.cap_c"] or None,
        )
        trace = run_baseline(
            problem, algo, bcfg, x0=x0, y0=y0, t_outer=cfg["run.t"],
            seed=seed, record_f=cfg["run.record_f"],
        )
    else:
        raise ConfigError(
            f"unknown algo.name {algo!r}; options: unibio, {', '.join(BASELINE_IDS)}"
        )
    wall_s = time.perf_counter() - wall0

    try:
        fit = fit_loglog_slope(
            trace.t, trace.grad_avg, window=_fit_window(cfg, int(trace.t[-1]))
        )
        slope = fit.slope
    except ValueError:
        slope = None

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        fname = trace_filename(problem.name, problem.constants.p, algo, seed)
        write_trace_csv(trace, os.path.join(out_dir, fname))

    return {
        "problem": problem.name,
        "p": problem.constants.p,
        "algo": algo,
        "seed": seed,
        "final_avg": trace.final_avg,
        "best_avg": trace.best_avg,
        "slope": slope,
        "oracle_total": trace.oracle_total,
        "wall_s": wall_s,
    }


def run_experiment(cfg: dict, out_dir: str | None = None) -> list[dict]:
    """Run all seeds of a config, write traces + summary.jsonl, and return
    the summary records in seed order."""
    if out_dir is None:
        out_dir = cfg["run.out"]
    seeds = [cfg["run.seed_base"] + i for i in range(cfg["run.seeds"])]
    workers = cfg["run.parallel"] or (os.cpu_count() or 1)
    workers = min(workers, len(seeds))
    if workers <= 1 or len(seeds) == 1:
        summaries = [run_single(cfg, seed, out_dir) for seed in seeds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_single, cfg, seed, out_dir) for seed in seeds]
            summaries = [f.result() for f in futures]
    summaries.sort(key=lambda s: s["seed"])
    os.makedirs(out_dir, exist_ok=True)
    with open(
        os.path.join(out_dir, "summary.jsonl"), "w", encoding="utf-8", newline="\n"
    ) as fh:
        for rec in summaries:
            fh.write(json.dumps(rec, allow_nan=False) + "\n")
    return summaries


_PROBLEM_HELP = (
    ("ex1", "scalar, p = 4 only: f = y^3, g = y^4/4 - y sin x, Phi = sin x"),
    ("ex3", "scalar, even p >= 2: clamped-sine upper level, Phi = sin(sin x)"),
    ("ex4", "dim-d, even p >= 2: p-norm lower level, Phi = sum_i sin x_i"),
    ("hypercleaning",
     "weighted p-norm regression with corrupted labels (n, d, real p >= 2, "
     "flip_prob, reg_c)"),
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="unibio",
        description="Bilevel optimization experiments under lower-level uniform convexity",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a config file (all seeds)")
    p_run.add_argument("config", help="path to a key=value config file")
    p_run.add_argument("--out", default=None, help="override run.out")

    p_slope = sub.add_parser("slope", help="fit a log-log slope to a trace CSV")
    p_slope.add_argument("trace", help="path to a trace CSV")
    p_slope.add_argument(
        "--window", default=None, metavar="LO:HI",
        help="inclusive iteration window (default: [T/10, T])",
    )
    p_slope.add_argument(
        "--column", default="grad_avg", choices=["grad_true", "grad_est", "grad_avg", "m_norm"],
        help="trace column to fit (default grad_avg)",
    )

    sub.add_parser("list-problems", help="list catalogued problem instances")

    args = parser.parse_args(argv)

    if args.command == "list-problems":
        for name, desc in _PROBLEM_HELP:
            print(f"{name:15s} {desc}")
        return 0

    if args.command == "slope":
        trace = read_trace_csv(args.trace)
        window = None
        if args.window:
            lo, _, hi = args.window.partition(":")
            window = (int(lo), int(hi))
        try:
            fit = fit_loglog_slope(trace.t, trace.column(args.column), window)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(
            f"slope={fit.slope:.6g} intercept={fit.intercept:.6g} "
            f"r2={fit.r_squared:.4f} n={fit.n_points} "
            f"window=[{fit.window[0]},{fit.window[1]}]"
        )
        return 0

    # run
    try:
        cfg = load_config(args.config)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_dir = args.out or cfg["run.out"]
    try:
        summaries = run_experiment(cfg, out_dir)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for rec in summaries:
        slope = "n/a" if rec["slope"] is None else f"{rec['slope']:.4f}"
        print(
            f"{rec['problem']} p={rec['p']:g} {rec['algo']} seed={rec['seed']}: "
            f"final_avg={rec['final_avg']:.6g} best_avg={rec['best_avg']:.6g} "
            f"slope={slope} oracle_total={rec['oracle_total']}"
        )
    print(f"wrote {len(summaries)} trace(s) + summary.jsonl to {out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
