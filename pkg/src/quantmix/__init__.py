"""quantmix: distributions whose quantile function is a non-negative mixture
of standardized basis quantile functions, fitted by constrained linear
regression on sample order statistics.
"""

from .basis import (
    BasisFunction,
    catalog_rows,
    constant_basis,
    eval_basis,
    make_catalog,
    make_custom,
    make_exponential,
    make_gb2,
    make_ispline_basis,
    make_normal,
    make_skewed_t,
    make_student_t,
    restore_basis,
)
from .design import (
    DesignProblem,
    PlottingScheme,
    WeightSpec,
    build_problem,
    order_stat_covariance,
    plotting_positions,
    plugin_normal_weights,
)
from .metrics import (
    GofReport,
    gof,
    lmoment_of_basis,
    sample_lmoments,
    wasserstein,
    wasserstein_bound_check,
)
from .model import FittedModel
from .solve import (
    ConstraintSet,
    FitResult,
    LMomentRows,
    asymptotic_covariance,
    cvar_coefficients,
    fit_cardinality,
    fit_lad,
    fit_lasso,
    fit_wls,
    lasso_path_to_cardinality,
    lmoment_constraint_rows,
)

__version__ = "0.1.0"

__all__ = [
    "BasisFunction",
    "ConstraintSet",
    "DesignProblem",
    "FitResult",
    "FittedModel",
    "GofReport",
    "LMomentRows",
    "PlottingScheme",
    "WeightSpec",
    "asymptotic_covariance",
    "build_problem",
    "catalog_rows",
    "constant_basis",
    "cvar_coefficients",
    "eval_basis",
    "fit_cardinality",
    "fit_lad",
    "fit_lasso",
    "fit_wls",
    "gof",
    "lasso_path_to_cardinality",
    "lmoment_constraint_rows",
    "lmoment_of_basis",
    "make_catalog",
    "make_custom",
    "make_exponential",
    "make_gb2",
    "make_ispline_basis",
    "make_normal",
    "make_skewed_t",
    "make_student_t",
    "order_stat_covariance",
    "plotting_positions",
    "plugin_normal_weights",
    "restore_basis",
    "sample_lmoments",
    "wasserstein",
    "wasserstein_bound_check",
    "__version__",
]
