"""Exception types raised across the package."""


class PenalizedSamplerError(Exception):
    """Base class for all package errors."""


class InvalidArgument(PenalizedSamplerError, ValueError):
    pass


class ConvergenceFailure(PenalizedSamplerError, RuntimeError):
    """An iterative routine hit its iteration cap."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class UnsupportedPenalty(PenalizedSamplerError, TypeError):
    pass


class NumericalFailure(PenalizedSamplerError, RuntimeError):
    pass


class InternalConsistencyError(PenalizedSamplerError, AssertionError):
    pass


class DivergenceError(PenalizedSamplerError, FloatingPointError):
    """A chain produced a non-finite or runaway iterate."""

    def __init__(self, step, norm):
        super().__init__(f"chain diverged at step {step} (|x| = {norm:.6g})")
        self.step = step
        self.norm = norm


class DataParseError(PenalizedSamplerError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(PenalizedSamplerError, ValueError):
    """Configuration or file layout does not match its schema."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path
