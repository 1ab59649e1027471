"""Bilevel optimization under lower-level uniform convexity.

Library layout:

- :mod:`unibio.problem_model`: signed-power calculus, problem constants,
  stochastic oracle model, catalogued instances (ex1/ex3/ex4,
  hypercleaning);
- :mod:`unibio.hypergradient`: exact implicit-differentiation hypergradient
  and the Neumann-series stochastic estimator with its error/bias
  constants;
- :mod:`unibio.epoch_sgd`: Epoch-SGD for uniformly convex objectives;
- :mod:`unibio.unibio`: the UniBiO method and its theory schedule;
- :mod:`unibio.baselines`: stocbio/ttsa/masoba comparison methods;
- :mod:`unibio.harness`: configs, seeded parallel runs, trace CSVs,
  summaries, slope fits, CLI (`unibio run|slope|list-problems`).
"""

from .baselines import BASELINE_DEFAULTS, BASELINE_IDS, BaselineConfig, run_baseline
from .epoch_sgd import (
    EpochConfig,
    EpochSGDResult,
    epoch_schedule,
    epoch_sgd,
    project_ball,
    theory_epoch_config,
)
from .harness import (
    ConfigError,
    SlopeFit,
    build_problem,
    fit_loglog_slope,
    load_config,
    parse_config,
    run_experiment,
    run_single,
)
from .hypergradient import (
    HypergradientSample,
    bias_constant,
    exact_hypergradient,
    neumann_error_bound,
    neumann_hypergradient,
)
from .problem_model import (
    CallCounters,
    ProblemConstants,
    StochasticBilevelProblem,
    chain_rule_generalized_grad,
    chain_rule_generalized_jacobian,
    make_example,
    make_hypercleaning,
    signed_power,
)
from .rng import RngState, philox_normal
from .trace import IterateTrace, read_trace_csv, write_trace_csv
from .unibio import (
    TheorySchedule,
    UniBiOConfig,
    predict_oracle_counts,
    theory_schedule,
    unibio_run,
)

__version__ = "0.1.0"

__all__ = [
    "BASELINE_DEFAULTS",
    "BASELINE_IDS",
    "BaselineConfig",
    "CallCounters",
    "ConfigError",
    "EpochConfig",
    "EpochSGDResult",
    "HypergradientSample",
    "IterateTrace",
    "ProblemConstants",
    "RngState",
    "SlopeFit",
    "StochasticBilevelProblem",
    "TheorySchedule",
    "UniBiOConfig",
    "bias_constant",
    "build_problem",
    "chain_rule_generalized_grad",
    "chain_rule_generalized_jacobian",
    "epoch_schedule",
    "epoch_sgd",
    "exact_hypergradient",
    "fit_loglog_slope",
    "load_config",
    "make_example",
    "make_hypercleaning",
    "neumann_error_bound",
    "neumann_hypergradient",
    "parse_config",
    "philox_normal",
    "predict_oracle_counts",
    "project_ball",
    "read_trace_csv",
    "run_baseline",
    "run_experiment",
    "run_single",
    "signed_power",
    "theory_epoch_config",
    "theory_schedule",
    "unibio_run",
    "write_trace_csv",
]
