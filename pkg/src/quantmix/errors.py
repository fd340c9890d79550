"""Exception hierarchy for quantmix.

The CLI maps these onto exit codes: data/IO problems -> 1, configuration
problems -> 2, solver/numerical problems -> 3.
"""


class QuantmixError(Exception):
    """Base class for all quantmix errors."""


class DomainError(QuantmixError, ValueError):
    """A probability argument lies outside the open interval (0, 1)."""


class ParameterError(QuantmixError, ValueError):
    """Invalid shape parameters for a basis family."""


class StandardizationError(ParameterError):
    """A basis cannot be standardized (degenerate interquartile range)."""


class CatalogError(QuantmixError, ValueError):
    """A catalog grid specification is invalid or filters to nothing."""


class ConfigError(QuantmixError, ValueError):
    """A run configuration file or flag set is invalid."""


class DataError(QuantmixError, ValueError):
    """Malformed input data (samples, price series)."""


class SolverError(QuantmixError, RuntimeError):
    """Base class for optimization failures."""


class RankDeficiencyError(SolverError):
    """The design matrix is rank deficient where full rank is required."""


class InfeasibleError(SolverError):
    """The constraint set admits no feasible point."""


class UnboundedError(SolverError):
    """The optimization problem is unbounded below."""


class IterationLimitError(SolverError):
    """An iterative solver hit its iteration cap before converging."""


class DivergentIntegralError(QuantmixError, ArithmeticError):
    """Endpoint-refined quadrature detected a non-integrable tail."""


class UnboundedDensityError(QuantmixError, ArithmeticError):
    """The mixture quantile function is flat where a density was requested."""


class DegenerateModelError(QuantmixError, ValueError):
    """Operation requires a non-constant model (some non-intercept weight)."""
