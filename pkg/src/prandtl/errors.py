"""Exception types shared across the package."""


class GridMismatchError(ValueError):
    """Two fields combined arithmetically do not share a grid."""


class ResolutionError(ValueError):
    """Requested spectral derivative order exceeds what the grid resolves."""


class UnsupportedOrderError(ValueError):
    """Requested y-derivative order exceeds the supported stencil order."""


class InvalidTailError(ValueError):
    """Tail decay exponent <= 1: the far-field integral may diverge."""


class ParameterError(ValueError):
    """Parameter outside the admissible range of an operation."""


class CompatibilityError(RuntimeError):
    """Compatibility precondition failed, or corrector construction failed."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class MonotonicityError(RuntimeError):
    """Monotonicity window violated where an operation requires it."""


class ConsistencyError(RuntimeError):
    """Boundary-consistency defect exceeded its tolerance."""


class CFLError(RuntimeError):
    """Advective CFL condition violated for the requested time step."""


class NonContractionError(RuntimeError):
    """Picard iteration hit max_iters without contracting."""

    def __init__(self, message, last_gaps=()):
        super().__init__(message)
        self.last_gaps = tuple(last_gaps)


class BlowupError(RuntimeError):
    """Non-finite values appeared during time integration."""
