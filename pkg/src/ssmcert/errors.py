"""Exception types shared across the package."""


class SsmCertError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(SsmCertError, ValueError):
    """An argument is outside the domain an operation accepts."""


class ResourceLimitError(SsmCertError, RuntimeError):
    """A configured size cap was exceeded.

    The message names the cap so the caller can raise it explicitly.
    """

    def __init__(self, message, cap=None):
        super().__init__(message)
        self.cap = cap


class InconsistentPartitionError(InvalidParameterError):
    """A partition violates the consistency condition of a branching matrix."""

    def __init__(self, message, violation=None):
        super().__init__(message)
        self.violation = violation


class SolverError(SsmCertError, RuntimeError):
    """An LP solver adapter failed to return a usable solution."""

    def __init__(self, message, dump_path=None):
        super().__init__(message)
        self.dump_path = dump_path
