"""Exception types raised by the library."""


class HkgError(Exception):
    """Base class for all library errors."""


class DimensionMismatchError(HkgError, ValueError):
    """Operands live on different truncated spaces."""


class ContractError(HkgError, ValueError):
    """An argument violates a documented precondition."""


class NumericConsistencyError(HkgError, ArithmeticError):
    """A quantity that must be real/bounded came out otherwise."""


class InvalidFiducialError(HkgError, ValueError):
    """Fiducial state lacks the support required to build a code basis."""


class CalibrationInfeasibleError(HkgError, RuntimeError):
    """Honest-channel statistics already violate the protocol thresholds."""


class InsufficientStatisticsError(HkgError, RuntimeError):
    """A witness selection is empty; the round cannot be evaluated."""


class UpdateInfeasibleError(HkgError, RuntimeError):
    """Not enough distilled bits remain to refresh the shared secret."""
