"""Exception hierarchy shared by all msbm modules."""


class MsbmError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(MsbmError, ValueError):
    """Model parameters violate their invariants (non-stochastic P, Q outside [0,1], ...)."""


class IrreducibilityError(MsbmError, ValueError):
    pass


class InputError(MsbmError, ValueError):
    """Malformed or inconsistent inputs (length mismatch, bad index, ...)."""


class AssumptionError(MsbmError, ValueError):
    """A modelling assumption needed by the computation does not hold."""


class OrderingError(MsbmError, ValueError):
    pass


class ConfigError(MsbmError, ValueError):
    pass


class FeasibilityError(MsbmError, ValueError):
    pass


class ConvergenceError(MsbmError, RuntimeError):
    """Iterative solver hit its iteration cap; ``residuals`` holds the last residuals."""

    def __init__(self, message, residuals=None, iterations=None):
        super().__init__(message)
        self.residuals = residuals or {}
        self.iterations = iterations


class MissingParameterError(MsbmError, ValueError):
    """An estimator entry needed by a computation is undefined (empty community)."""


class DegenerateLikelihoodError(MsbmError, ArithmeticError):
    """The observations have zero probability under the HMM parameters."""
