"""Exact and stochastic hypergradients under lower-level uniform convexity.

With z = sp(y, p-1), the hypergradient of Phi(x) = f(x, y*(x)) is

    grad Phi(x) = grad_x f - grad_xy g . (S H)^(-1) . dF/dz ,

where J = H S is the generalized Jacobian d(grad_y g)/dz in numerator
layout (as produced by the chain-rule helpers), H the lower-level Hessian
in y and S the diagonal chain-rule scaling.  Since H is symmetric,
(S H)^(-1) = J^(-T): the linear solve uses the transpose of the catalogued
generalized Jacobian.  For the diagonal-Hessian example instances J is
symmetric and the transpose is a no-op; for hypercleaning it is not.

The stochastic estimator replaces the inverse with a truncated Neumann
series evaluated with fresh independent Jacobian samples per factor:

    H_Q = (1/C) sum_{q=0}^{Q-1} prod_{j=1}^{q} (I - J^{(q,j)} / C)

applied right-to-left as JVPs, costing Q(Q-1)/2 Jacobian draws per sample.
Its mean-operator truncation error obeys
``|E[H_Q] - J^{-1}| <= (1/mu) (1 - mu/C)^Q``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem_model import ProblemConstants, StochasticBilevelProblem
from .rng import RngState

__all__ = [
    "exact_hypergradient",
    "neumann_hypergradient",
    "neumann_error_bound",
    "bias_constant",
    "HypergradientSample",
]


def exact_hypergradient(problem: StochasticBilevelProblem, x, y) -> np.ndarray:
    """Implicit-differentiation hypergradient at (x, y) from exact oracles.

    Evaluated at y = y*(x) this is grad Phi(x); at approximate y the error
    is bounded by L_phi2 * ||y - y*(x)|| (see :func:`bias_constant`).
    Uses a linear solve, never an explicit inverse.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    jac = problem.gen_jacobian_g(x, y)
    v = np.linalg.solve(jac.T, problem.gen_grad_f(x, y))
    return problem.grad_x_f(x, y) - problem.cross_grad_g(x, y) @ v


@dataclass(frozen=True)
class HypergradientSample:
    """One stochastic hypergradient draw plus its oracle-call footprint."""

    value: np.ndarray
    n_ul: int
    n_cross: int
    n_gen: int

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.value))


def neumann_hypergradient(
    problem: StochasticBilevelProblem,
    x,
    y,
    q: int,
    cap_c: float,
    rng: RngState,
) -> HypergradientSample:
    """Stochastic Neumann-series hypergradient estimate at (x, y).

    ``q`` is the truncation order Q >= 1 and ``cap_c`` the series scaling C,
    which must dominate the catalogued Jacobian norm bound
    (``problem.constants.cap_c``) for the series to contract.  Each of the
    Q partial products draws its own fresh Jacobian samples (q draws for
    the order-q term), so one estimate consumes exactly 2 upper, 1 cross
    and Q(Q-1)/2 Jacobian oracle calls.
    """
    if q < 1:
        raise ValueError(f"Neumann truncation order must be >= 1, got {q}")
    if cap_c < problem.constants.cap_c:
        raise ValueError(
            f"cap_c={cap_c} must dominate the catalogued Jacobian bound "
            f"{problem.constants.cap_c}"
        )
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))

    gx = problem.grad_x_f_noisy(x, y, rng)
    df = problem.gen_grad_f_noisy(x, y, rng)
    cross = problem.cross_grad_g_noisy(x, y, rng)

    acc = df.copy()  # q = 0 term: empty product
    n_gen = 0
    for order in range(1, q):
        v = df.copy()
        for _ in range(order):
            jac = problem.gen_jacobian_g_noisy(x, y, rng)
            v = v - (jac.T @ v) / cap_c
            n_gen += 1
        acc += v
    value = gx - cross @ (acc / cap_c)
    return HypergradientSample(value=value, n_ul=2, n_cross=1, n_gen=n_gen)


def neumann_error_bound(mu: float, cap_c: float, q: int) -> float:
    """Operator bound ||E[H_Q] - J^{-1}|| <= (1/mu) (1 - mu/cap_c)^q."""
    if mu <= 0 or cap_c < mu or q < 0:
        raise ValueError("need 0 < mu <= cap_c and q >= 0")
    return (1.0 / mu) * (1.0 - mu / cap_c) ** q


def bias_constant(constants: ProblemConstants) -> tuple[float, float, float]:
    """Hypergradient smoothness/bias constants (L_phi1, L_phi2, l_p).

    - ``l_p = (p l_g1 / mu)^(1/(p-1))``: Hölder constant of x -> y*(x),
      ``||y*(x1) - y*(x2)|| <= l_p ||x1 - x2||^(1/(p-1))``.
    - ``L_phi2``: bias constant, ``||hypergrad(x, y) - grad Phi(x)|| <=
      L_phi2 ||y - y*(x)||``.
    - ``L_phi1 = l_p L_phi2``: Hölder-smoothness constant of Phi,
      ``||grad Phi(x1) - grad Phi(x2)|| <= L_phi1 ||dx||^(1/(p-1)) +
      L_phi2 ||dx||``.
    """
    c = constants
    l_p = (c.p * c.l_g1 / c.mu) ** (1.0 / (c.p - 1.0))
    l_phi2 = (
        c.l_f1
        + c.l_f0 * c.l_g2 / c.mu
        + c.l_g1 * c.l_f1 / c.mu
        + c.l_g1 * c.l_f0 * c.l_g2 / c.mu**2
    )
    l_phi1 = l_p * l_phi2
    return l_phi1, l_phi2, l_p
