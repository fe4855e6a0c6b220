"""Exception types shared across the package."""


class GsgeError(Exception):
    """Base class for all package errors."""


class ParameterError(GsgeError):
    """A scalar argument is out of its legal range (e.g. k outside 1..n)."""


class InputError(GsgeError):
    """Array input violates a structural contract (asymmetry, bad shape)."""


class DomainError(GsgeError):
    """Operation evaluated outside its domain (boundary node, psi <= 0, ...)."""


class AdmissibilityError(DomainError):
    """A jet or field is not strictly admissible where strictness is required.

    Carries the failing margins so callers can report the worst offender.
    """

    def __init__(self, message, margins=None, node=None):
        super().__init__(message)
        self.margins = margins
        self.node = node


class InitializationError(GsgeError):
    """Admissible initializer construction failed."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class SolveError(GsgeError):
    """Newton/homotopy/regularization driver failed; carries the trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ConfigError(GsgeError):
    """Run configuration is missing, malformed, or fails load-time validation."""


class SnapshotError(GsgeError):
    """Snapshot file is corrupted, truncated, or has an unsupported version."""
