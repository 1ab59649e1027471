"""
UniBiO vs single/double-loop baselines
======================================

Three reconstructed baselines share the problem oracles and the trace
contract: a double-loop method (several lower steps per outer step, then
a Neumann sample and a plain SGD step), a two-timescale single-loop
method (one lower step per outer step), and a single-loop method with an
auxiliary variable tracking the inverse-Jacobian system plus momentum.
All were built for strongly convex lower levels, i.e. p = 2.

At p = 2 everything works and the unnormalized baselines are fast.  The
interesting regime is p > 2, where the lower level is only uniformly
convex: their effective tracking degrades while UniBiO's refresh schedule
is built for it.  On this particular 1-D family the upper objective is
too forgiving to separate the methods at sigma = 0 (any sign-correct
direction eventually finds cos x = 0), so the table below reports the
p = 2 race and the p = 8 behaviour side by side rather than declaring a
winner — the run-it-yourself numbers are the point.
"""

import numpy as np

from unibio import (
    BASELINE_DEFAULTS,
    BaselineConfig,
    EpochConfig,
    UniBiOConfig,
    make_example,
    run_baseline,
    unibio_run,
)

T = 500


def unibio_cfg(p, eta):
    lower = EpochConfig(gamma1=1.0, t1=5, d1=1.0, t_total=100, p=float(p))
    return UniBiOConfig(
        eta=eta, beta=0.9, interval=10, q=10, warm=lower, refresh=lower
    )


for p, eta in ((2, 0.05), (8, 0.01)):
    problem = make_example("ex3", p=p)
    print(f"ex3, p = {p}, noiseless, T = {T}, init (1, 1):")
    print(
        f"{'method':>9s} {'final avg':>10s} {'best true grad':>15s} "
        f"{'t to 1e-3':>10s} {'total oracle':>13s}"
    )

    rows = {}
    trace = unibio_run(problem, unibio_cfg(p, eta), x0=[1.0], y0=[1.0], t_outer=T)
    rows["unibio"] = trace
    for algo in ("stocbio", "ttsa", "masoba"):
        cfg = BaselineConfig(**BASELINE_DEFAULTS[algo])
        rows[algo] = run_baseline(problem, algo, cfg, x0=[1.0], y0=[1.0], t_outer=T)

    for name, tr in rows.items():
        hits = np.nonzero(tr.grad_true <= 1e-3)[0]
        t_hit = f"{tr.t[hits[0]]}" if len(hits) else "-"
        print(
            f"{name:>9s} {tr.final_avg:10.4f} {min(tr.grad_true):15.2e} "
            f"{t_hit:>10s} {tr.oracle_total:13d}"
        )
    print()
