"""Penalized estimation via envelope representations.

A numpy/scipy toolkit built around one idea: many penalties and losses
can be written as the infimum over an auxiliary variable of a simple
coupled objective.  Profiling the auxiliary variable gives closed-form
majorization updates, and the package composes them into exact or
monotone solvers for robust fused-lasso smoothing, nonparametric
quantile regression by trend filtering, and nearly unbiased binomial
smoothing with a concave fusion penalty.
"""

from .applications import (
    AppSpec,
    Dataset,
    SolutionPath,
    aic,
    binomial_fused_lasso,
    fit_fdp,
    fit_qrtf,
    fit_rfl,
    fused_lasso_gaussian,
    kfold_cv,
    simulate,
    solution_path,
)
from .duality import (
    EXPONENTIAL,
    GAUSSIAN_LOCATION,
    GAUSSIAN_SCALE,
    EnvelopeFamily,
    EnvelopeReport,
    GridSpec,
    check_envelope_identity,
    conjugate_numeric,
    default_lambda_grid,
    envelope_argmin_numeric,
    envelope_integrand,
    multivariate_location,
    variance_mean,
)
from .errors import (
    CapabilityError,
    ConvergenceError,
    EnvoptError,
    MonotonicityError,
    ValidationError,
)
from .losses import (
    LossSpec,
    lipschitz_bound,
    location_envelope_update,
    logit_scale_lambda,
    loss_grad,
    loss_value,
    variance_mean_update,
)
from .operators import (
    DifferenceOperator,
    diff_matrix,
    moreau_envelope_numeric,
    soft_threshold,
)
from .penalties import (
    PenaltySpec,
    lambda_hat,
    penalty_deriv,
    penalty_dual,
    penalty_value,
    prox,
)
from .solvers import (
    FitResult,
    SolverConfig,
    logistic_fused_lasso,
    mm_driver,
    proximal_gradient,
    weighted_fused_lasso,
    weighted_trend_filter,
)

__version__ = "0.1.0"
