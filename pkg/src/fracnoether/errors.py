"""Exception hierarchy.

Usage problems (bad orders, grids that are too small, violated hypotheses)
derive from :class:`ValueError`; failures of the numerics themselves derive
from :class:`NumericalError`. The CLI maps the first family to exit code 2
and the second to exit code 3.
"""


class NumericalError(RuntimeError):
    """Base class for failures of a numerical procedure."""


class GammaPoleError(ValueError):
    pass


class GridTooSmallError(ValueError):
    pass


class OutOfRangeError(ValueError):
    pass


class InvalidOrderError(ValueError):
    pass


class HypothesisError(ValueError):
    """Raised when an input violates the hypothesis of an identity."""


class InsufficientDataError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


class BlowUpError(NumericalError):
    """Integration left the finite range; ``trajectory`` holds the valid prefix."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class DomainExitError(NumericalError):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory
