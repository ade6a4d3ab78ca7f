"""Exception types raised by the numerical routines."""


class NumericalFailure(RuntimeError):
    """Base class for failures caused by the numerics rather than the input."""


class GapClosedError(NumericalFailure):
    """The spectral gap fell below the requested threshold.

    Attributes
    ----------
    t : float or None
        Time (or twist parameter) at which the gap closed.
    spectrum : ndarray or None
        Low-lying eigenvalues at that point.
    """

    def __init__(self, message, t=None, spectrum=None):
        super().__init__(message)
        self.t = t
        self.spectrum = spectrum


class ConvergenceError(NumericalFailure):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigurationError(ValueError):
    """The requested configuration violates a geometric precondition."""


class TwistStepError(NumericalFailure):
    """Twist finite difference left the neighbourhood where the frame is smooth."""


class GridRefinementError(NumericalFailure):
    """A link overlap on the twist grid is (nearly) singular."""
