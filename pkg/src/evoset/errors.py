"""Exception hierarchy shared by all modules."""


class EvosetError(Exception):
    """Base class for library errors."""


class ValidationError(EvosetError, ValueError):
    """Input data failed validation (CLI exit code 2)."""


class NotStochastic(ValidationError):
    pass


class Reducible(ValidationError):
    pass


class BadStationary(ValidationError):
    pass


class Disconnected(ValidationError):
    pass


class NoGiantComponent(ValidationError):
    pass


class BadDegree(ValidationError):
    pass


class EmptyStart(ValidationError):
    pass


class EmptyFamily(ValidationError):
    pass


class ZeroConductance(ValidationError):
    pass


class NotReversible(ValidationError):
    pass


class BelowFloor(ValidationError):
    pass


class EmptyRange(ValidationError):
    pass


class ZeroGauge(ValidationError):
    pass


class GammaZero(ValidationError):
    pass


class BadRange(ValidationError):
    pass


class TooLarge(EvosetError):
    """Requested exact computation exceeds the enumeration ceiling (exit 3)."""


class UnboundedIntegral(EvosetError):
    """Bound integral diverges on the requested range (exit 4)."""


class NotMixed(EvosetError):
    """Mixing criterion not met within the scan horizon."""

    def __init__(self, limit, message=None):
        self.limit = limit
        super().__init__(message or f"criterion not met within horizon {limit}")
