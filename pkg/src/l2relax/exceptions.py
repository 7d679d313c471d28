"""Exception types shared across the package.

Two families matter for the CLI exit-code contract: ``UsageError``
(and plain ``ValueError``) map to exit code 2, ``NumericalError``
subclasses map to exit code 1.
"""


class L2RelaxError(Exception):
    """Base class for all package errors."""


class UsageError(L2RelaxError, ValueError):
    """Invalid argument, configuration, or input domain (CLI exit 2)."""


class NumericalError(L2RelaxError, RuntimeError):
    """Numerical failure at runtime (CLI exit 1)."""


class ContractViolationError(UsageError):
    """Input violates a documented precondition (e.g. non-symmetric matrix)."""


class NotPSDError(NumericalError):
    """Matrix has an eigenvalue below the PSD tolerance."""


class SingularMatrixError(NumericalError):
    """Linear system is numerically singular."""


class InsufficientDataError(UsageError):
    """Too few observations for the requested estimator or scheme."""


class MissingTargetError(UsageError):
    """Panel operation requires an aligned target series."""


class DegenerateVarianceError(NumericalError):
    """A series has (numerically) zero variance where positive variance is required."""


class DegenerateSharpeError(NumericalError):
    """Sharpe ratio undefined: zero variance of realized returns."""
