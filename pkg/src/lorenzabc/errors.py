"""Exception hierarchy shared across the package."""


class LorenzABCError(Exception):
    """Base class for all package errors."""


class ParameterDomainError(LorenzABCError, ValueError):
    """Distribution parameters or arguments outside their valid domain."""


class DivergingMomentError(LorenzABCError, ArithmeticError):
    """The requested moment of the distribution is infinite."""


class DataError(LorenzABCError, ValueError):
    """Input data violate a structural invariant."""


class ResolutionError(DataError):
    """Too few observations to resolve the requested grouping."""


class IngestionError(DataError):
    """A grouped-data file could not be parsed or validated."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class BoundUnavailable(LorenzABCError):
    """The Gastwirth upper bound needs class boundaries and a mean income."""


class LikelihoodDomainError(LorenzABCError, ValueError):
    """The likelihood is undefined at the requested point."""


class InitializationError(LorenzABCError, ValueError):
    """A sampler could not start from the given initial state."""


class StallError(LorenzABCError, RuntimeError):
    """A rejection loop exceeded its attempt cap."""

    def __init__(self, message, step=None, epsilon=None):
        super().__init__(message)
        self.step = step
        self.epsilon = epsilon


class ConfigError(LorenzABCError, ValueError):
    """Invalid run configuration."""


class UnsupportedCombinationError(ConfigError):
    """The chosen estimator cannot handle the chosen submodel."""


class EmptyStudyError(ConfigError):
    """A replication study was requested with no replicates."""
