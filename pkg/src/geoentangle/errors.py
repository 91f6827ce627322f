"""Exception hierarchy shared by all modules."""


class GeoEntError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(GeoEntError, ValueError):
    pass


class IterationLimit(GeoEntError):
    """An iterative method ran out of iterations.

    The best estimate available at the point of failure is attached as
    ``best`` so callers can decide whether it is good enough.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DegenerateState(GeoEntError):
    pass


class BlockTooLarge(GeoEntError):
    pass


class TooLarge(GeoEntError):
    pass


class NumericalBreakdown(GeoEntError, ArithmeticError):
    pass


class CanonicalViolation(GeoEntError):
    pass


class CriticalDegeneracy(GeoEntError):
    """The transfer matrix has a second eigenvalue of (numerically) unit modulus."""


class DegenerateDirection(GeoEntError):
    pass


class InvariantViolation(GeoEntError, AssertionError):
    pass


class InsufficientPoints(GeoEntError, ValueError):
    pass


class IoError(GeoEntError, OSError):
    pass
