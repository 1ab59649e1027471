"""The UniBiO method: normalized momentum upper steps with Epoch-SGD
lower-level refreshes, plus the theory-prescribed hyperparameter schedule.

One run:

1. warm start  y_1 = EpochSGD(g(x_0, .)) from y_0;
2. for t = 1..T: refresh y_t by a warm-started EpochSGD call whenever t is
   a multiple of the refresh interval I; draw one Neumann hypergradient
   sample; update the momentum average m_t = beta m_{t-1} + (1-beta) s_t
   (m_0 = 0) and take the normalized step x_{t+1} = x_t - eta m_t/||m_t||
   (skipped when ||m_t|| = 0, so step lengths are always eta or 0).

``theory_schedule`` instantiates every knob from the catalogued problem
constants at a target stationarity eps, following the high-probability
analysis; ``predict_oracle_counts`` reproduces the run's oracle footprint
exactly from the schedule alone, which the budget-accounting tests assert
against the recorded trace.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .epoch_sgd import EpochConfig, epoch_schedule, epoch_sgd
from .hypergradient import bias_constant, neumann_hypergradient
from .problem_model import CallCounters, StochasticBilevelProblem
from .rng import RngState
from .trace import IterateTrace, _TraceBuilder

__all__ = [
    "UniBiOConfig",
    "unibio_run",
    "TheorySchedule",
    "theory_schedule",
    "predict_oracle_counts",
]


@dataclass(frozen=True)
class UniBiOConfig:
    """UniBiO hyperparameters.

    eta       normalized step size
    beta      momentum averaging factor in [0, 1)
    interval  refresh cadence I (lower-level refresh at t = I, 2I, ...)
    q         Neumann truncation order per hypergradient sample
    warm      Epoch-SGD config for the warm start at x_0
    refresh   Epoch-SGD config for the periodic refreshes
    cap_c     Neumann scaling C (defaults to the catalogued Jacobian bound)
    """

    eta: float
    beta: float
    interval: int
    q: int
    warm: EpochConfig
    refresh: EpochConfig
    cap_c: Optional[float] = None

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        if self.interval < 1:
            raise ValueError("interval must be >= 1")
        if self.q < 1:
            raise ValueError("q must be >= 1")


def _lower_solve(
    problem: StochasticBilevelProblem,
    x: np.ndarray,
    y: np.ndarray,
    cfg: EpochConfig,
    rng: RngState,
    counters: CallCounters,
):
    def grad_oracle(w):
        counters.ll += 1
        return problem.grad_y_g_noisy(x, w, rng)

    return epoch_sgd(grad_oracle, y, cfg)


def unibio_run(
    problem: StochasticBilevelProblem,
    cfg: UniBiOConfig,
    *,
    x0,
    y0,
    t_outer: int,
    seed: int = 0,
    record_f: bool = False,
) -> IterateTrace:
    """Run UniBiO for ``t_outer`` outer iterations and record a trace.

    The trace rows are indexed by t = 1..t_outer and evaluated at the
    pre-update iterate x_t.  With all noise scales zero the run is
    bit-for-bit deterministic and independent of ``seed``.
    """
    if t_outer < 1:
        raise ValueError("t_outer must be >= 1")
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    rng = RngState(seed)
    counters = CallCounters()
    cap_c = problem.constants.cap_c if cfg.cap_c is None else cfg.cap_c
    builder = _TraceBuilder(record_f=record_f, keep_samples=True)
    t0 = time.perf_counter()

    warm_res = _lower_solve(problem, x, y, cfg.warm, rng, counters)
    y = warm_res.w
    m = np.zeros_like(x)
    refreshes = 0

    for t in range(1, t_outer + 1):
        if t % cfg.interval == 0:
            y = _lower_solve(problem, x, y, cfg.refresh, rng, counters).w
            refreshes += 1
        sample = neumann_hypergradient(problem, x, y, cfg.q, cap_c, rng)
        counters.ul += sample.n_ul
        counters.cross += sample.n_cross
        counters.gen += sample.n_gen
        m = cfg.beta * m + (1.0 - cfg.beta) * sample.value
        m_norm = float(np.linalg.norm(m))

        grad_true = (
            float(np.linalg.norm(problem.grad_phi(x)))
            if problem.grad_phi is not None
            else float("nan")
        )
        builder.add(
            t=t,
            grad_true=grad_true,
            grad_est=sample.norm,
            m_norm=m_norm,
            counters=counters,
            elapsed_s=time.perf_counter() - t0,
            f_val=problem.f_value(x, y) if record_f else None,
            sample=sample.value,
            x=x,
            y=y,
        )
        if m_norm > 0.0:
            x = x - cfg.eta * (m / m_norm)

    meta = {
        "problem": problem.name,
        "p": problem.constants.p,
        "algo": "unibio",
        "seed": seed,
        "final_x": x,
        "final_y": y,
        "refreshes": refreshes,
        "warm_steps": warm_res.steps_taken,
        "warm_budget_too_small": warm_res.budget_too_small,
    }
    return builder.build(meta)


@dataclass(frozen=True)
class TheorySchedule:
    """Fully instantiated theory-mode hyperparameters for one instance."""

    eps: float
    delta: float
    beta: float
    eta: float
    interval: int
    q: int
    q_degenerate: bool
    t_outer: int
    t_capped: bool
    warm: EpochConfig
    refresh: EpochConfig
    warm_capped: bool
    refresh_capped: bool
    delta_tilde: float
    k_dagger: int
    sigma1_sq: float
    l_phi1: float
    l_phi2: float
    l_p: float

    def to_config(self) -> UniBiOConfig:
        return UniBiOConfig(
            eta=self.eta,
            beta=self.beta,
            interval=self.interval,
            q=self.q,
            warm=self.warm,
            refresh=self.refresh,
        )


def _epoch_params(big_g, sigma_g1, mu, p):
    noise2 = big_g**2 + sigma_g1**2
    alpha1 = big_g * (p * big_g / mu) ** (1.0 / (p - 1.0)) / (24.0 * noise2)
    k1 = math.ceil(60.0**2 * noise2 / big_g**2)
    return alpha1, k1


def theory_schedule(
    constants,
    eps: float,
    delta: float,
    *,
    t_cap: int = 10_000,
    k_cap: int = 100_000,
    r0: float = 1.0,
    c1: float = 1.0,
    c2: float = 1.0,
    big_c1: float = 8.0,
) -> TheorySchedule:
    """Instantiate the theory-prescribed schedule at target accuracy eps.

    Implements, from the catalogued constants:

    - momentum: 1 - beta = min{1, c1 eps^2 / sigma1^2} with
      sigma1^2 = sigma_f^2 + (3/mu^2)[(sigma_f^2 + l_f0^2)(sigma_g2^2 +
      2 l_g1^2) + sigma_f^2 l_g1^2];
    - step size eta = c2 min{(eps min{(1-b)/L_phi1, p/((p-1) L_phi1),
      (1-b)/(l_p L_phi2)})^(p-1), (1-b) eps/L_phi2, eps/L_phi2};
    - refresh interval I = ceil(1/(1-beta));
    - Neumann order Q = ceil(ln(mu eps/(4 l_g1 l_f0)) / ln(1 - mu/C)),
      clamped to 1 and flagged degenerate when mu = C (a single factor
      already annihilates the residual) or when the log argument is >= 1;
    - outer budget T = ceil(big_c1 delta_phi/(eta eps)), capped at t_cap;
    - warm/refresh Epoch-SGD budgets with G_0 = (2^(2 L1 r0 + 1) - 1) L1/L0
      (r0 = the warm-start distance ||y_0 - y*(x_0)||, or an upper bound)
      and G_t = L1/L0, radii R_{0,1} = min{(p G_0/mu)^(1/(p-1))
      log(2/delta_tilde), r0} and R_{t,1} = min{eps/L_phi2, 1/L1}, budgets
      K ~ 60^2 (G^2+sigma_g1^2)(p/mu)^2 log(2/delta_tilde)^(2(p-1)) /
      min{eps/(2 L_phi2), 1/(2 L1)}^(2(p-1)), capped at k_cap (the caps
      keep desk-scale runs bounded; budget accounting is cap-invariant);
    - confidence split delta_tilde = delta/(T k_dagger) with k_dagger the
      number of epochs the refresh budget sustains.  k_dagger depends on
      K_t which depends on delta_tilde: resolved by a two-pass fixed
      point (pass 1 uses delta_tilde = delta/T).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if r0 <= 0:
        raise ValueError("r0 must be positive")
    c = constants
    p = c.p
    pm1 = p - 1.0
    tau = 2.0 * pm1 / p
    l_phi1, l_phi2, l_p = bias_constant(c)
    if l_phi2 <= 0:
        raise ValueError("theory schedule needs L_phi2 > 0 (one of l_f0, l_f1 > 0)")

    sigma1_sq = c.sigma_f**2 + (3.0 / c.mu**2) * (
        (c.sigma_f**2 + c.l_f0**2) * (c.sigma_g2**2 + 2.0 * c.l_g1**2)
        + c.sigma_f**2 * c.l_g1**2
    )
    one_minus_beta = 1.0 if sigma1_sq == 0 else min(1.0, c1 * eps**2 / sigma1_sq)
    beta = 1.0 - one_minus_beta

    eta_terms = [
        (1.0 - beta) * eps / l_phi2,
        eps / l_phi2,
    ]
    if l_phi1 > 0:
        inner = eps * min(
            one_minus_beta / l_phi1,
            p / (pm1 * l_phi1),
            one_minus_beta / (l_p * l_phi2),
        )
        eta_terms.append(inner**pm1)
    eta = c2 * min(eta_terms)

    interval = math.ceil(1.0 / one_minus_beta)

    q_degenerate = False
    if c.l_g1 == 0 or c.l_f0 == 0:
        q, q_degenerate = 1, True
    else:
        arg = c.mu * eps / (4.0 * c.l_g1 * c.l_f0)
        if c.mu >= c.cap_c:
            # 1 - mu/C = 0: a single factor annihilates the residual.
            q, q_degenerate = 1, True
        elif arg >= 1.0:
            q, q_degenerate = 1, True
        else:
            q = max(1, math.ceil(math.log(arg) / math.log(1.0 - c.mu / c.cap_c)))

    t_raw = math.ceil(big_c1 * c.delta_phi / (eta * eps))
    t_outer = min(t_raw, t_cap)
    t_capped = t_raw > t_cap

    big_g0 = (2.0 ** (2.0 * c.l1 * r0 + 1.0) - 1.0) * c.l1 / c.l0
    big_gt = c.l1 / c.l0

    def build(delta_tilde):
        log_term = math.log(2.0 / delta_tilde)
        r_target = min(eps / (2.0 * l_phi2), 1.0 / (2.0 * c.l1))
        k_budget = 60.0**2 * (p / c.mu) ** 2 * log_term ** (2.0 * pm1) / r_target ** (2.0 * pm1)

        a01, k01 = _epoch_params(big_g0, c.sigma_g1, c.mu, p)
        r01 = min((p * big_g0 / c.mu) ** (1.0 / pm1) * log_term, r0)
        k0_raw = math.ceil(k_budget * (big_g0**2 + c.sigma_g1**2))
        warm_capped = k0_raw > k_cap
        warm = EpochConfig(
            gamma1=a01, t1=k01, d1=r01, t_total=min(k0_raw, k_cap), p=p
        )

        at1, kt1 = _epoch_params(big_gt, c.sigma_g1, c.mu, p)
        rt1 = min(eps / l_phi2, 1.0 / c.l1)
        kt_raw = math.ceil(k_budget * (big_gt**2 + c.sigma_g1**2))
        refresh_capped = kt_raw > k_cap
        refresh = EpochConfig(
            gamma1=at1, t1=kt1, d1=rt1, t_total=min(kt_raw, k_cap), p=p
        )
        k_dagger = max(
            1,
            math.floor(
                (1.0 / tau) * math.log2((kt_raw / kt1) * (2.0**tau - 1.0) + 1.0)
            ),
        )
        return warm, refresh, warm_capped, refresh_capped, k_dagger

    # Two-pass fixed point for the delta_tilde <-> k_dagger circularity.
    _, _, _, _, k_dagger = build(delta / t_outer)
    delta_tilde = delta / (t_outer * k_dagger)
    warm, refresh, warm_capped, refresh_capped, k_dagger = build(delta_tilde)

    return TheorySchedule(
        eps=eps, delta=delta, beta=beta, eta=eta, interval=interval,
        q=q, q_degenerate=q_degenerate, t_outer=t_outer, t_capped=t_capped,
        warm=warm, refresh=refresh, warm_capped=warm_capped,
        refresh_capped=refresh_capped, delta_tilde=delta_tilde,
        k_dagger=k_dagger, sigma1_sq=sigma1_sq,
        l_phi1=l_phi1, l_phi2=l_phi2, l_p=l_p,
    )


def predict_oracle_counts(cfg: UniBiOConfig, t_outer: int, p: float) -> dict:
    """Exact oracle-call totals of a ``unibio_run`` from its config alone.

    Per outer step: 2 upper draws, 1 cross draw and Q(Q-1)/2 Jacobian
    draws.  Lower-level calls: one per Epoch-SGD step, with the realized
    epoch lengths of the warm start plus floor(T/I) refreshes.
    """
    warm_steps = sum(epoch_schedule(cfg.warm.t1, cfg.warm.p, cfg.warm.t_total))
    refresh_steps = sum(
        epoch_schedule(cfg.refresh.t1, cfg.refresh.p, cfg.refresh.t_total)
    )
    n_refresh = t_outer // cfg.interval
    return {
        "ul": 2 * t_outer,
        "cross": t_outer,
        "gen": (cfg.q * (cfg.q - 1) // 2) * t_outer,
        "ll": warm_steps + n_refresh * refresh_steps,
        "refreshes": n_refresh,
    }
