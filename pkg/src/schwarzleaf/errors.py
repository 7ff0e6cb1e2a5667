"""Exception hierarchy.

Every error raised deliberately by the package derives from
:class:`GeometryError` so callers (the CLI in particular) can separate
configuration mistakes from genuine bugs.
"""


class GeometryError(Exception):
    """Base class for all package errors."""


class DomainError(GeometryError, ValueError):
    """A radial value lies outside the exterior domain (f^2 <= 0 or r <= 0)."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConfigError(GeometryError, ValueError):
    """Malformed scene file or unsupported descriptor."""


class DegenerateTriangle(GeometryError):
    pass


class UnsupportedSurface(GeometryError):
    pass


class UnsupportedDimension(GeometryError):
    pass


class UnsupportedBackend(GeometryError):
    pass


class SolverFailure(GeometryError):
    pass


class ChartError(GeometryError):
    pass


class BoundaryError(GeometryError):
    pass


class SignError(GeometryError):
    pass


class UnknownCheck(GeometryError, KeyError):
    pass


class NotSpacelike(GeometryError):
    """The induced metric fails to be positive definite at some sample point."""

    def __init__(self, message, index):
        super().__init__(message)
        self.index = index
