"""Exception hierarchy shared by the library and the CLI."""


class HazardscopeError(Exception):
    """Base class for all package errors."""


class ValidationError(HazardscopeError, ValueError):
    """Input data violates a schema or invariant (CLI exit code 2)."""


class BackendError(HazardscopeError):
    """A remote captioner or classifier failed (CLI exit code 3)."""
