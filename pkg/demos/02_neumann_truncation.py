"""
Truncated Neumann series as a stochastic inverse
================================================

The linear solve in the exact hypergradient is replaced, in the
stochastic estimator, by a Q-term Neumann series whose factors each use a
fresh Jacobian sample.  Two things are worth seeing concretely:

1. on a constant scalar Jacobian the truncation error is exactly
   (1/a)(1 - a/C)^Q — the operator bound is tight there; and
2. with noisy oracles the estimator is unbiased for its noiseless
   truncated counterpart, so Q controls bias and Q alone.
"""

import numpy as np

from unibio import (
    ProblemConstants,
    StochasticBilevelProblem,
    exact_hypergradient,
    make_example,
    neumann_error_bound,
    neumann_hypergradient,
)
from unibio.rng import RngState


def scalar_problem(a):
    """dx = dy = 1, generalized Jacobian [[a]], true correction 1/a."""
    constants = ProblemConstants(
        mu=a, p=2.0, l0=1.0, l1=1.0, l_g1=1.0, l_g2=0.0,
        l_f0=1.0, l_f1=0.0, cap_c=1.0,
        sigma_f=0.0, sigma_g1=0.0, sigma_g2=0.0, delta_phi=1.0,
    )
    return StochasticBilevelProblem(
        name=f"scalar-{a:g}", dx=1, dy=1, constants=constants,
        f_value=lambda x, y: 0.0,
        g_value=lambda x, y: 0.0,
        grad_x_f=lambda x, y: np.zeros(1),
        gen_grad_f=lambda x, y: np.ones(1),
        grad_y_g=lambda x, y: np.zeros(1),
        cross_grad_g=lambda x, y: -np.ones((1, 1)),
        gen_jacobian_g=lambda x, y: np.array([[a]]),
        meta={},
    )


# 1. truncation error vs Q: measured == predicted == bound (C = 1).
a = 0.5
problem = scalar_problem(a)
exact = exact_hypergradient(problem, np.zeros(1), np.zeros(1))[0]
print(f"scalar Jacobian a = {a}: true value {exact:g}")
print(f"{'Q':>4s} {'estimate':>12s} {'error':>12s} {'(1/a)(1-a)^Q':>14s} {'bound':>12s}")
for q in (1, 2, 3, 5, 10, 20):
    sample = neumann_hypergradient(
        problem, np.zeros(1), np.zeros(1), q=q, cap_c=1.0, rng=RngState(0)
    )
    err = abs(sample.value[0] - exact)
    predicted = (1 / a) * (1 - a) ** q
    print(
        f"{q:4d} {sample.value[0]:12.8f} {err:12.3e} "
        f"{predicted:14.3e} {neumann_error_bound(a, 1.0, q):12.3e}"
    )

# 2. unbiasedness under oracle noise: the mean over many draws lands on
#    the noiseless truncated value, not on something Q-dependent-worse.
clean = make_example("ex3", p=2)
noisy = make_example("ex3", p=2, sigma_f=0.5, sigma_g1=0.5, sigma_g2=0.5)
x, y = np.array([0.8]), np.array([0.5])
q = 5
det = neumann_hypergradient(clean, x, y, q=q, cap_c=1.0, rng=RngState(0)).value[0]
rng = RngState(1)
n = 20_000
draws = np.array(
    [neumann_hypergradient(noisy, x, y, q=q, cap_c=1.0, rng=rng).value[0]
     for _ in range(n)]
)
print(f"\nunbiasedness on ex3 (p=2), Q = {q}, sigma = 0.5, {n} draws:")
print(f"  noiseless truncated value  {det:+.6f}")
print(f"  empirical mean             {draws.mean():+.6f}")
print(f"  standard error             {draws.std(ddof=1) / np.sqrt(n):.6f}")
print(f"  oracle cost per draw: 2 upper, 1 cross, Q(Q-1)/2 = {q*(q-1)//2} Jacobian")
