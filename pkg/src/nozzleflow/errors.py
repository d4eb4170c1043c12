"""Exception types shared across the package."""


class NozzleflowError(Exception):
    """Base class for package errors."""


class DomainError(NozzleflowError):
    """Input outside the mathematical domain of an operation."""


class ConfigError(NozzleflowError):
    """Invalid configuration, parameter set, or input file."""


class QuadratureError(NozzleflowError):
    """Quadrature failed its node-doubling certification."""


class SolverError(NozzleflowError):
    """Base class for time-integration failures."""


class StabilityError(SolverError):
    """Time step exceeds the advective stability bound."""


class CavitationError(SolverError):
    """Density fell below the vacuum floor."""


class NonFiniteError(SolverError):
    """NaN or Inf appeared in the solution."""


class SweepError(NozzleflowError):
    """Too few runs of a sweep succeeded to compare."""
