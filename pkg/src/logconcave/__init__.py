"""Maximum likelihood estimation of log-concave densities.

The estimator maximizes ``sum_i p_i psi(x_i) - integral exp(psi)`` over
concave ``psi`` that are piecewise linear between the data points, using an
active set method with Newton-solved subproblems.  Censored or binned data
are handled by an EM algorithm on top of it.

>>> import numpy as np
>>> from logconcave import prepare, fit
>>> res = fit(prepare(np.random.default_rng(0).normal(size=50)))
>>> abs(res.diagnostics.total_mass_residual) < 1e-8
True
"""

from ._accel import backend
from .active_set import (
    ActiveSetConfig,
    FitResult,
    constraint_values,
    directional_derivatives,
    fit,
    step_to_feasible,
)
from .censored_em import CensoredObservation, EmConfig, EmResult, censored_loglik, e_step, em_fit, observations
from .errors import (
    ConditioningError,
    DegenerateDataError,
    DomainError,
    InvariantViolation,
    LogConcaveError,
    NonConvergenceError,
)
from .inner_solver import NewtonConfig, newton_maximize, reduce_weights, subspace_maximize
from .numerics import JDeriv, j, j_deriv, jab_cells
from .objective import (
    DiagnosticReport,
    WeightedData,
    cdf,
    diagnostics,
    eval_objective,
    gradient,
    hessian,
    mean_and_second_moment,
    mean_integral_of_F,
    prepare,
)

__all__ = [
    "ActiveSetConfig",
    "CensoredObservation",
    "ConditioningError",
    "DegenerateDataError",
    "DiagnosticReport",
    "DomainError",
    "EmConfig",
    "EmResult",
    "FitResult",
    "InvariantViolation",
    "JDeriv",
    "LogConcaveError",
    "NewtonConfig",
    "NonConvergenceError",
    "WeightedData",
    "backend",
    "cdf",
    "censored_loglik",
    "constraint_values",
    "diagnostics",
    "directional_derivatives",
    "e_step",
    "em_fit",
    "eval_objective",
    "fit",
    "gradient",
    "hessian",
    "j",
    "j_deriv",
    "jab_cells",
    "mean_and_second_moment",
    "mean_integral_of_F",
    "newton_maximize",
    "observations",
    "prepare",
    "reduce_weights",
    "step_to_feasible",
    "subspace_maximize",
]
