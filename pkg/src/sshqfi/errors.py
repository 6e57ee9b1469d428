"""Exception types shared across the package."""


class SSHQFIError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(SSHQFIError, ValueError):
    """A model or algorithm parameter violates its admissible range."""


class DomainError(SSHQFIError, ValueError):
    """A function was evaluated outside its domain (e.g. outside the central gap)."""


class NoBoundStateError(SSHQFIError):
    """No in-gap bound state exists for the requested parameters."""


class DimensionGuardError(SSHQFIError):
    """Matrix too large for a dense eigensolver."""


class RangeError(SSHQFIError, ValueError):
    """A requested time interval is not covered by the sampled grid."""


class RecurrenceWarning(UserWarning):
    """Requested times reach beyond the finite-chain recurrence horizon."""
