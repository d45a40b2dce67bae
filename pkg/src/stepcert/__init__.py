"""Learning step sizes for gradient descent and conjugate gradient from samples.

The package runs the two iterative schemes on convex quadratic instances,
scores them with an iteration-count or primal-integral cost, computes the
certificate constants that justify discretizing parameter space, and runs
ERM selection experiments over the resulting nets.
"""

__version__ = "0.1.0"

from stepcert.instances import (
    AssumptionReport,
    InstanceDistribution,
    ProblemInstance,
    check_assumption_cg,
    check_assumption_gd,
    feasible_beta_strongly_convex,
    generate_instance,
)
from stepcert.iterators import (
    AlgorithmConfig,
    DivergenceError,
    Termination,
    Trajectory,
    cg_run,
    cg_step,
    gd_run,
    gd_step,
    pad_iterate,
)
from stepcert.costs import (
    CostValue,
    Measure,
    cost_upper_bound,
    iteration_count_cost,
    primal_integral_cost,
)
from stepcert.bounds import CertificateContext, RecurrencePair

__all__ = [
    "AlgorithmConfig",
    "AssumptionReport",
    "CertificateContext",
    "CostValue",
    "DivergenceError",
    "InstanceDistribution",
    "Measure",
    "ProblemInstance",
    "RecurrencePair",
    "Termination",
    "Trajectory",
    "cg_run",
    "cg_step",
    "check_assumption_cg",
    "check_assumption_gd",
    "cost_upper_bound",
    "feasible_beta_strongly_convex",
    "gd_run",
    "gd_step",
    "generate_instance",
    "iteration_count_cost",
    "pad_iterate",
    "primal_integral_cost",
]
