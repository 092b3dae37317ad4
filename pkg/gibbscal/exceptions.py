"""Exceptions raised by gibbscal.

Each class also derives from the closest builtin, so callers may catch
either the package error or the builtin one.
"""


class GibbsCalError(Exception):
    """Base class for every gibbscal error."""


class ContractViolation(GibbsCalError, ValueError):
    """Arguments do not satisfy an operation's preconditions."""


class DomainError(GibbsCalError, ValueError):
    """A value lies outside the domain where the operation is defined."""


class UnsupportedOperation(GibbsCalError, NotImplementedError):
    """The operation is not defined for this kind of object."""


class InitializationError(GibbsCalError, RuntimeError):
    """A sampler could not start from the requested state."""


class DegeneratePosteriorError(GibbsCalError, ArithmeticError):
    """The draws have a singular covariance matrix."""


class SingularHessianError(GibbsCalError, ArithmeticError):
    """The risk Hessian could not be inverted."""


class ConfigError(GibbsCalError, ValueError):
    """A run configuration is missing, unknown or conflicting."""

    def __init__(self, message, field=None) -> None:
        super().__init__(message)
        self.field = field


class DataParseError(GibbsCalError, ValueError):
    """A dataset file is malformed."""

    def __init__(self, message, line=None, column=None) -> None:
        super().__init__(message)
        self.line = line
        self.column = column
