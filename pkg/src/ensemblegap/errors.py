"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematically supported domain."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to isolate or refine its target."""


class ResourceError(RuntimeError):
    """The request exceeds the supported problem size."""
