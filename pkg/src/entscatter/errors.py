"""Exception types raised by entscatter."""


class EntScatterError(Exception):
    """Base class for all entscatter errors."""


class NotHermitian(EntScatterError):
    """Input matrix is not Hermitian within tolerance."""


class NotSymmetric(EntScatterError):
    """Input matrix is not real symmetric within tolerance."""


class NotPSD(EntScatterError):
    """Input matrix has an eigenvalue below the positive-semidefinite tolerance."""


class SingularInput(EntScatterError):
    """Input matrix is numerically singular."""


class ConvergenceFailure(EntScatterError):
    """An iterative routine (eigensolver, optimizer) failed to converge."""


class DegenerateNormalization(EntScatterError):
    """The density-matrix normalization is numerically zero for this sample."""


class DomainError(EntScatterError):
    """Argument outside the mathematical domain of the function."""


class OrderViolation(EntScatterError):
    """Spectrum argument is not sorted (descending) or not nonnegative."""


class InsufficientData(EntScatterError):
    """Not enough usable rows to perform a fit."""


class ConfigError(EntScatterError):
    """Invalid command-line configuration; message names the offending field."""
