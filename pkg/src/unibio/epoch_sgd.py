"""Epoch-SGD for (mu, p)-uniformly convex objectives.

The solver runs epochs of projected SGD steps around a shrinking ball.
Epoch k performs T_k steps with constant step size gamma_k inside
B(w_1^k, D_k); the next center is the average of the epoch's pre-update
iterates w_1^k..w_{T_k}^k, and the schedule updates

    T_{k+1} = ceil(2^tau T_k),  gamma_{k+1} = gamma_k / 2,
    D_{k+1} = D_k / 2^(1/p),     tau = 2(p-1)/p .

Epochs run while the total step budget allows one more *complete* epoch;
the returned point is the final epoch's averaged center.  The distance to
the minimizer contracts at the rate O(T^(-1/(2(p-1)))) (function gap
O(T^(-p/(2(p-1))))), interpolating between the strongly convex p = 2 rate
and slower rates for flatter minima.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "project_ball",
    "EpochConfig",
    "EpochSGDResult",
    "epoch_schedule",
    "epoch_sgd",
    "theory_epoch_config",
]


def project_ball(v, center, radius: float) -> np.ndarray:
    """Euclidean projection of v onto the closed ball B(center, radius)."""
    v = np.asarray(v, dtype=float)
    center = np.asarray(center, dtype=float)
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    diff = v - center
    dist = float(np.linalg.norm(diff))
    if dist <= radius:
        return v.copy()
    return center + (radius / dist) * diff


@dataclass(frozen=True)
class EpochConfig:
    """Epoch-SGD hyperparameters.

    gamma1   first-epoch step size
    t1       first-epoch length (steps)
    d1       first-epoch ball radius
    t_total  total step budget; epochs run while the next complete epoch
             still fits
    p        uniform-convexity power (sets tau and the radius decay)
    """

    gamma1: float
    t1: int
    d1: float
    t_total: int
    p: float = 2.0

    def __post_init__(self):
        if self.gamma1 <= 0:
            raise ValueError("gamma1 must be positive")
        if self.t1 < 1:
            raise ValueError("t1 must be >= 1")
        if self.d1 <= 0:
            raise ValueError("d1 must be positive")
        if self.t_total < 0:
            raise ValueError("t_total must be nonnegative")
        if self.p < 2:
            raise ValueError("p must be >= 2")


@dataclass
class EpochSGDResult:
    """Output of one Epoch-SGD call.

    ``w`` is the final epoch's averaged center (or ``w_init`` when not even
    the first epoch fit in the budget, flagged by ``budget_too_small``).
    ``centers`` records the center of every epoch plus the returned point.
    """

    w: np.ndarray
    epochs_completed: int
    steps_taken: int
    budget_too_small: bool
    centers: list = field(default_factory=list)


def epoch_schedule(t1: int, p: float, t_total: int) -> list[int]:
    """Epoch lengths T_1, T_2, ... that fit completely within t_total.

    T_{k+1} = ceil(2^tau T_k) with tau = 2(p-1)/p; at p = 2 the lengths
    double exactly.  Used by both the solver loop and the oracle-count
    predictors so budget accounting is exact by construction.
    """
    if t1 < 1:
        raise ValueError("t1 must be >= 1")
    tau = 2.0 * (p - 1.0) / p
    lengths: list[int] = []
    t_k = int(t1)
    used = 0
    while used + t_k <= t_total:
        lengths.append(t_k)
        used += t_k
        t_k = math.ceil(2.0**tau * t_k)
    return lengths


def epoch_sgd(
    grad_oracle: Callable[[np.ndarray], np.ndarray],
    w_init,
    cfg: EpochConfig,
) -> EpochSGDResult:
    """Run Epoch-SGD with gradient estimates from ``grad_oracle``.

    ``grad_oracle(w)`` owns all randomness (and any oracle-call counting);
    the solver is deterministic given the oracle's outputs.
    """
    w_init = np.atleast_1d(np.asarray(w_init, dtype=float))
    lengths = epoch_schedule(cfg.t1, cfg.p, cfg.t_total)
    if not lengths:
        return EpochSGDResult(
            w=w_init.copy(), epochs_completed=0, steps_taken=0,
            budget_too_small=True, centers=[w_init.copy()],
        )
    center = w_init.copy()
    gamma = cfg.gamma1
    radius = cfg.d1
    centers = [center.copy()]
    steps = 0
    for t_k in lengths:
        w = center.copy()
        acc = np.zeros_like(w)
        for _ in range(t_k):
            acc += w
            w = project_ball(w - gamma * grad_oracle(w), center, radius)
            steps += 1
        center = acc / t_k
        centers.append(center.copy())
        gamma *= 0.5
        radius /= 2.0 ** (1.0 / cfg.p)
    return EpochSGDResult(
        w=center, epochs_completed=len(lengths), steps_taken=steps,
        budget_too_small=False, centers=centers,
    )


def theory_epoch_config(
    big_g: float,
    sigma: float,
    mu: float,
    p: float,
    eps_target: float,
    delta_tilde: float,
) -> EpochConfig:
    """Theory-prescribed Epoch-SGD configuration.

    ``big_g`` bounds the stochastic gradient norms on the relevant ball,
    ``sigma`` the gradient noise, and ``eps_target`` is the target distance
    to the minimizer, guaranteed with probability 1 - delta_tilde by

        ||w - w*|| <= (60^2 (G^2+sigma^2))^(1/(2(p-1)))
                      (p/mu)^(1/(p-1)) log(2/delta_tilde) / T^(1/(2(p-1))) .

    Returns gamma1 = G (pG/mu)^(1/(p-1)) / (24 (G^2+sigma^2)),
    t1 = ceil(60^2 (G^2+sigma^2) / G^2),
    d1 = (pG/mu)^(1/(p-1)) log(2/delta_tilde)  (cap it by a known initial
    distance when available), and t_total from inverting the bound.
    """
    if not 0.0 < delta_tilde < 1.0:
        raise ValueError("delta_tilde must lie in (0, 1)")
    if big_g <= 0 or mu <= 0 or eps_target <= 0:
        raise ValueError("big_g, mu and eps_target must be positive")
    if p < 2:
        raise ValueError("p must be >= 2")
    noise2 = big_g**2 + sigma**2
    log_term = math.log(2.0 / delta_tilde)
    gamma1 = big_g * (p * big_g / mu) ** (1.0 / (p - 1.0)) / (24.0 * noise2)
    t1 = math.ceil(60.0**2 * noise2 / big_g**2)
    d1 = (p * big_g / mu) ** (1.0 / (p - 1.0)) * log_term
    t_total = math.ceil(
        60.0**2 * noise2 * (p / mu) ** 2 * log_term ** (2.0 * (p - 1.0))
        / eps_target ** (2.0 * (p - 1.0))
    )
    return EpochConfig(gamma1=gamma1, t1=t1, d1=d1, t_total=t_total, p=p)
