"""
The theory-prescribed schedule, end to end
==========================================

Every UniBiO knob — momentum, step size, refresh interval, Neumann
truncation, warm-start and refresh budgets, confidence split — is a
closed-form function of the catalogued problem constants and a target
accuracy eps.  This script instantiates that schedule on the p = 2
clamped-sine instance at a few accuracy levels, shows how each knob
moves, and then runs the capped schedule and checks that the predicted
oracle counts match the run's counters exactly (they are the same
arithmetic by construction, which is the point: budget accounting is a
theorem about the code, not an estimate).
"""

import dataclasses

import numpy as np

from unibio import make_example, predict_oracle_counts, theory_schedule, unibio_run

problem = make_example("ex3", p=2)
r0 = abs(1.0 - np.sin(1.0))  # ||y_0 - y*(x_0)|| at init (1, 1)

print("schedule vs target accuracy (uncapped budgets shown raw):")
print(f"{'eps':>6s} {'1-beta':>8s} {'I':>5s} {'eta':>12s} {'T raw':>10s} {'warm t1':>8s}")
for eps in (1.0, 0.5, 0.3, 0.1):
    sch = theory_schedule(
        problem.constants, eps, 0.1, t_cap=10**9, k_cap=10**9, r0=r0
    )
    print(
        f"{eps:6.2f} {1 - sch.beta:8.4f} {sch.interval:5d} {sch.eta:12.3e} "
        f"{sch.t_outer:10d} {sch.warm.t1:8d}"
    )

# the degenerate Neumann case: when mu equals the Jacobian bound C a
# single factor inverts exactly, so Q = 1 and no Jacobian draws happen.
# Lifting C makes the series genuinely truncated.
print("\nNeumann truncation order vs the Jacobian bound C (eps = 0.3):")
for cap in (1.0, 2.0, 4.0):
    constants = dataclasses.replace(problem.constants, cap_c=cap)
    sch = theory_schedule(constants, 0.3, 0.1, t_cap=70, k_cap=20_000, r0=r0)
    tag = " (degenerate)" if sch.q_degenerate else ""
    print(f"  C = {cap:g}: Q = {sch.q}{tag}")

# run the desk-capped schedule and reconcile the oracle accounting.
sch = theory_schedule(problem.constants, 0.3, 0.1, t_cap=70, k_cap=20_000, r0=r0)
trace = unibio_run(
    problem, sch.to_config(), x0=[1.0], y0=[1.0], t_outer=sch.t_outer
)
predicted = predict_oracle_counts(sch.to_config(), sch.t_outer, 2.0)
print(f"\ncapped run (T = {sch.t_outer}, I = {sch.interval}, Q = {sch.q}):")
print(f"{'oracle':>8s} {'predicted':>10s} {'recorded':>10s}")
for key, col in (
    ("ul", trace.oracle_ul), ("ll", trace.oracle_ll),
    ("cross", trace.oracle_cross), ("gen", trace.oracle_gen),
):
    print(f"{key:>8s} {predicted[key]:10d} {col[-1]:10d}")
print(f"final averaged gradient norm: {trace.final_avg:.4f}")
