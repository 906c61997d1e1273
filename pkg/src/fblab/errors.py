"""Exception types shared across the package."""


class DomainError(ValueError):
    """A point, sphere, or ball leaves the region where a field is defined."""


class ParseError(ValueError):
    """A field file is malformed or violates a grid invariant."""


class DegenerateFitError(RuntimeError):
    """Least-squares fit has no usable signal (e.g. constant field)."""
