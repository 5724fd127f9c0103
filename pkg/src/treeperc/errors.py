"""Exception types shared across the package."""


class PercolationError(Exception):
    """Base class for all package errors."""


class DomainError(PercolationError, ValueError):
    """A parameter lies outside the range where an operation is defined.

    ``threshold`` names the violated bound when one exists, so callers (the
    CLI in particular) can report it.
    """

    def __init__(self, message, threshold=None):
        super().__init__(message)
        self.threshold = threshold


class ConditioningError(PercolationError, ValueError):
    """Conditioning on an event of zero (or non-positive signed) mass."""


class ResourceError(PercolationError, RuntimeError):
    """A computation would exceed a configured size cap."""


class ConstructionError(PercolationError, ValueError):
    """An inconsistent structural description (tree spec, cutset, ...)."""
