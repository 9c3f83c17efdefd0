"""Exception hierarchy shared by every module.

The CLI maps ``ValidationError`` to exit code 2 and ``NumericalError`` to
exit code 3.
"""


class PCError(Exception):
    """Base class for all predictor-corrector errors."""


class ValidationError(PCError, ValueError):
    """Bad shapes, out-of-range parameters or malformed inputs."""


class NumericalError(PCError, ArithmeticError):
    """A computation produced an unusable numeric result."""


class NonFiniteError(NumericalError):
    """NaN or Inf surfaced from an operation."""


class StepSizeUnderflowError(NumericalError):
    """Adaptive step fell below the controller's minimum step."""


class DivergenceError(NumericalError):
    """Training loss became non-finite."""
