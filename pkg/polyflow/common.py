"""Common objects"""


class ErrorCode(object):
    """
    Error codes enum
    """
    OK = 0
    ERROR = 1
    EXCEPTION = 2


class ExitCode(object):
    """
    Command line exit codes
    """
    OK = 0
    USAGE = 1
    NUMERICAL = 2


class PolyflowWarning(Warning):
    """
    A polyflow warning.
    """


class PolyflowError(Exception):
    """
    Base class of all polyflow errors.
    """


class InputError(PolyflowError, ValueError):
    """
    Wrong dimensions, NaN data or a violated precondition.
    """


class ConfigError(PolyflowError):
    """
    Invalid experiment configuration.
    """


class NumericalError(PolyflowError):
    """
    A numerical procedure could not produce a result.
    """


class NonConvergenceError(NumericalError):
    """
    An iteration hit its cap before converging.
    """

    def __init__(self, message, iterations=None, residual=None):
        super(NonConvergenceError, self).__init__(message)
        self.iterations = iterations
        self.residual = residual


class InvariantSetError(NumericalError):
    """
    The maximal invariant set could not be determined.
    """


class RedundancyError(NumericalError):
    """
    The raw state block of a basis is numerically degenerate.
    """


class InfeasibleError(NumericalError):
    """
    An optimization problem has an empty feasible set.
    """


class UnboundedError(NumericalError):
    """
    An optimization problem is unbounded.
    """
