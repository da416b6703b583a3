"""Exception types shared across the package."""


class PolysquareError(Exception):
    """Base class for all package errors."""


class PrecisionExhausted(PolysquareError):
    """An interval comparison stayed ambiguous up to the precision cap."""

    def __init__(self, message: str, detail: object = None):
        super().__init__(message)
        self.detail = detail


class DepthExhausted(PrecisionExhausted):
    """The digit stream of a continued fraction cannot supply the requested index."""


class IllegalDigits(PolysquareError, ValueError):
    pass


class OutOfRange(PolysquareError, ValueError):
    pass


class DigitBoundViolated(PolysquareError, ValueError):
    pass


class DigitTooSmall(PolysquareError, ValueError):
    pass


class HypothesisViolated(PolysquareError, ValueError):
    """A division number coincides with a rotation point {m alpha}."""


class InvalidGate(PolysquareError, ValueError):
    pass


class InvalidSurface(PolysquareError, ValueError):
    pass


class SingularHit(PolysquareError):
    """The orbit reached a singular point of the exchange map."""

    def __init__(self, message: str, step: int = 0, elapsed: float = 0.0):
        super().__init__(message)
        self.step = step
        self.elapsed = elapsed


class DivisibilityViolated(PolysquareError, ValueError):
    pass


class NotInvariant(PolysquareError):
    pass


class PreconditionViolated(PolysquareError, ValueError):
    pass
