"""Exception types shared across the package."""


class CovthreshError(Exception):
    """Base class for package-specific errors."""


class EmptyInput(CovthreshError, ValueError):
    pass


class InvalidConfig(CovthreshError, ValueError):
    pass


class InfeasibleSpec(CovthreshError, ValueError):
    pass


class LengthNotPowerOfTwo(CovthreshError, ValueError):
    pass


class DegenerateInput(CovthreshError, ValueError):
    pass


class MissingTruth(CovthreshError, ValueError):
    pass


class NotUnitNorm(CovthreshError, ValueError):
    pass


class IndexOutOfRange(CovthreshError, ValueError):
    pass


class ConvergenceFailure(CovthreshError, RuntimeError):
    """Eigensolver did not reach the residual target within max_iter.

    Carries the best iterate so callers can inspect how close it got.
    """

    def __init__(self, message, best_value=None, best_vector=None, residual=None):
        super().__init__(message)
        self.best_value = best_value
        self.best_vector = best_vector
        self.residual = residual
