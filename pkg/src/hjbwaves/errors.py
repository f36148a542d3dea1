"""Exception hierarchy shared by all modules."""


class HJBWaveError(Exception):
    """Base class for errors raised by hjbwaves."""


class DomainError(HJBWaveError, ValueError):
    """An argument lies outside the domain of a closure or map."""


class InvalidLimitsError(HJBWaveError, ValueError):
    """Far-field limits do not straddle the switching level 1."""


class PreconditionError(HJBWaveError, ValueError):
    """A documented precondition of an operation is violated."""


class NoWaveError(HJBWaveError):
    """No heteroclinic connection exists for the requested data."""


class SchemeError(HJBWaveError, RuntimeError):
    """A numerical scheme failed (instability, positivity loss, underflow)."""


class ConsistencyError(HJBWaveError, RuntimeError):
    """An internal consistency check on computed data failed."""
