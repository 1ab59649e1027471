"""Baseline stochastic bilevel methods built for strongly convex lower
levels (p = 2), reconstructed in simplified batch-size-1 form.

All three share the problem-model oracles and the trace contract, so they
are directly comparable to UniBiO at matched oracle budgets:

``stocbio``  double-loop: ``inner_steps`` lower SGD steps per outer step,
             then a Neumann hypergradient sample and a plain SGD step on x.
``ttsa``     two-timescale single-loop: one lower SGD step per outer step.
``masoba``   single-loop with an auxiliary variable z tracking the linear
             system J^T z = dF/dz by one SGD step per iteration, a
             momentum-averaged upper direction, and unnormalized steps.

On instances with p > 2 the generalized Jacobian degenerates near flat
minimizers, which is exactly the regime these methods were not designed
for; the comparison tests record how they fall behind UniBiO there.
Catalogued default settings live in :data:`BASELINE_DEFAULTS`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .hypergradient import neumann_hypergradient
from .problem_model import CallCounters, StochasticBilevelProblem
from .rng import RngState
from .trace import IterateTrace, _TraceBuilder

__all__ = ["BaselineConfig", "BASELINE_DEFAULTS", "BASELINE_IDS", "run_baseline"]

BASELINE_IDS = ("stocbio", "ttsa", "masoba")

DIVERGENCE_GUARD = 1e6

# Catalogued comparison settings (upper lr, lower lr, extras).
BASELINE_DEFAULTS = {
    "stocbio": {"eta_ul": 0.5, "eta_ll": 0.1, "inner_steps": 5, "q": 10},
    "ttsa": {"eta_ul": 0.1, "eta_ll": 0.1, "q": 10},
    "masoba": {"eta_ul": 1.0, "eta_ll": 0.01, "eta_z": 0.01, "beta": 0.9},
}


@dataclass(frozen=True)
class BaselineConfig:
    """Hyperparameters shared by the baseline methods.

    eta_ul/eta_ll  upper/lower step sizes
    inner_steps    lower steps per outer step (stocbio)
    q              Neumann truncation order (stocbio, ttsa)
    eta_z          auxiliary-variable step size (masoba)
    beta           momentum factor (masoba)
    cap_c          Neumann scaling (defaults to the catalogued bound)
    """

    eta_ul: float
    eta_ll: float
    inner_steps: int = 5
    q: int = 10
    eta_z: float = 0.01
    beta: float = 0.9
    cap_c: Optional[float] = None

    def __post_init__(self):
        if self.eta_ul <= 0 or self.eta_ll <= 0 or self.eta_z <= 0:
            raise ValueError("step sizes must be positive")
        if self.inner_steps < 1:
            raise ValueError("inner_steps must be >= 1")
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")


def run_baseline(
    problem: StochasticBilevelProblem,
    algo: str,
    cfg: BaselineConfig,
    *,
    x0,
    y0,
    t_outer: int,
    seed: int = 0,
    record_f: bool = False,
) -> IterateTrace:
    """Run one baseline for ``t_outer`` outer iterations under the shared
    trace contract (rows at pre-update iterates; ``m_norm`` is the applied
    direction norm).  Stops early with ``meta['diverged'] = True`` if
    ||x|| exceeds the divergence guard."""
    if algo not in BASELINE_IDS:
        raise ValueError(f"unknown baseline {algo!r}; options: {BASELINE_IDS}")
    if t_outer < 1:
        raise ValueError("t_outer must be >= 1")
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    rng = RngState(seed)
    counters = CallCounters()
    cap_c = problem.constants.cap_c if cfg.cap_c is None else cfg.cap_c
    builder = _TraceBuilder(record_f=record_f, keep_samples=True)
    t0 = time.perf_counter()

    m = np.zeros_like(x)
    z = np.zeros(problem.dy)
    diverged = False

    for t in range(1, t_outer + 1):
        if algo == "stocbio":
            for _ in range(cfg.inner_steps):
                counters.ll += 1
                y = y - cfg.eta_ll * problem.grad_y_g_noisy(x, y, rng)
            sample = neumann_hypergradient(problem, x, y, cfg.q, cap_c, rng)
            counters.ul += sample.n_ul
            counters.cross += sample.n_cross
            counters.gen += sample.n_gen
            direction = sample.value
        elif algo == "ttsa":
            counters.ll += 1
            y = y - cfg.eta_ll * problem.grad_y_g_noisy(x, y, rng)
            sample = neumann_hypergradient(problem, x, y, cfg.q, cap_c, rng)
            counters.ul += sample.n_ul
            counters.cross += sample.n_cross
            counters.gen += sample.n_gen
            direction = sample.value
        else:  # masoba
            counters.ll += 1
            y = y - cfg.eta_ll * problem.grad_y_g_noisy(x, y, rng)
            jac = problem.gen_jacobian_g_noisy(x, y, rng)
            df = problem.gen_grad_f_noisy(x, y, rng)
            counters.gen += 1
            counters.ul += 1
            z = z - cfg.eta_z * (jac.T @ z - df)
            gx = problem.grad_x_f_noisy(x, y, rng)
            cross = problem.cross_grad_g_noisy(x, y, rng)
            counters.ul += 1
            counters.cross += 1
            est = gx - cross @ z
            m = cfg.beta * m + (1.0 - cfg.beta) * est
            direction = m

        grad_true = (
            float(np.linalg.norm(problem.grad_phi(x)))
            if problem.grad_phi is not None
            else float("nan")
        )
        builder.add(
            t=t,
            grad_true=grad_true,
            grad_est=float(np.linalg.norm(direction)),
            m_norm=float(np.linalg.norm(direction)),
            counters=counters,
            elapsed_s=time.perf_counter() - t0,
            f_val=problem.f_value(x, y) if record_f else None,
            sample=direction,
            x=x,
            y=y,
        )
        x = x - cfg.eta_ul * direction
        if float(np.linalg.norm(x)) > DIVERGENCE_GUARD:
            diverged = True
            break

    meta = {
        "problem": problem.name,
        "p": problem.constants.p,
        "algo": algo,
        "seed": seed,
        "final_x": x,
        "final_y": y,
        "diverged": diverged,
    }
    return builder.build(meta)
