"""Exception and warning types shared across the toolkit."""


class HC3Error(Exception):
    """Base class for toolkit errors."""


class ConvergenceError(HC3Error, RuntimeError):
    """An iterative solve did not reach its tolerance.

    The best residual seen is kept on ``residual`` so callers can decide
    whether to retry with a larger budget.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class BracketError(HC3Error, ValueError):
    """A search window does not bracket the quantity being located."""


class GeometryError(HC3Error, ValueError):
    """Degenerate chart point or a sample that is off the tangency curve."""


class GammaNotRegularError(GeometryError):
    """The zero set of beta.N is not a regular curve."""


class TruncationWarning(RuntimeWarning):
    """Enlarging an artificial box moved an eigenvalue by more than the tolerance."""


class CoarseGridWarning(RuntimeWarning):
    """Grid spacing is too large for the magnetic length."""
