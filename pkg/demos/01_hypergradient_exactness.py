"""
Exact hypergradients by implicit differentiation
================================================

The hypergradient of Phi(x) = f(x, y*(x)) never needs y*'s formula: at
any (x, y) the chain-rule pieces (cross gradient, generalized Jacobian,
generalized upper gradient) assemble it through one linear solve.  This
script checks the implementation three independent ways on the catalogued
instances: against the closed-form grad Phi, against a central difference
of Phi, and at perturbed y to show the bias degrades linearly.
"""

import numpy as np

from unibio import bias_constant, exact_hypergradient, make_example

problems = [
    make_example("ex1", p=4),
    make_example("ex3", p=2),
    make_example("ex3", p=4),
    make_example("ex3", p=8),
    make_example("ex4", p=4, dim=3),
]

# 1. at y = y*(x): the implicit-differentiation value vs the closed form
#    and vs a central difference of Phi.
print("exactness at y = y*(x), 41-point grid on [-3, 3]:")
print(f"{'instance':>14s} {'vs grad_phi':>12s} {'vs central fd':>14s}")
h = 1e-5
for problem in problems:
    err_closed = 0.0
    err_fd = 0.0
    for x_scalar in np.linspace(-3.0, 3.0, 41):
        x = np.full(problem.dx, x_scalar)
        grad = exact_hypergradient(problem, x, problem.optimal_y(x))
        err_closed = max(err_closed, float(np.linalg.norm(grad - problem.grad_phi(x))))
        fd = np.empty(problem.dx)
        for i in range(problem.dx):
            e = np.zeros(problem.dx)
            e[i] = h
            fd[i] = (problem.phi(x + e) - problem.phi(x - e)) / (2 * h)
        err_fd = max(err_fd, float(np.linalg.norm(grad - fd)))
    name = f"{problem.name}-p{problem.constants.p:g}"
    print(f"{name:>14s} {err_closed:12.3e} {err_fd:14.3e}")

# 2. away from y*: the error is at most L_phi2 * ||y - y*(x)||, so an
#    inexact lower-level solve costs the upper level only linearly.  (ex3
#    is the instance whose upper gradient actually varies with y; on ex1
#    and ex4 the correction term is y-invariant and the bias is zero.)
problem = make_example("ex3", p=4)
_, l_phi2, _ = bias_constant(problem.constants)
rng = np.random.default_rng(0)
print(f"\nbias at perturbed y (ex3, p=4, L_phi2 = {l_phi2:g}):")
print(f"{'||delta||':>10s} {'bias':>10s} {'bound':>10s}")
for scale in (0.1, 0.03, 0.01, 0.003):
    x = rng.uniform(-2.0, 2.0, size=1)
    delta = np.array([scale if rng.random() < 0.5 else -scale])
    est = exact_hypergradient(problem, x, problem.optimal_y(x) + delta)
    bias = float(np.linalg.norm(est - problem.grad_phi(x)))
    print(f"{scale:10.3f} {bias:10.2e} {l_phi2 * scale:10.2e}")
