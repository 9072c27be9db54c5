"""Exception types raised by the library."""


class GeometryError(Exception):
    """Base class for all errors raised by bundlereduce."""


class NonFiniteFieldError(GeometryError):
    """A field returned NaN/inf at a finite-difference stencil point."""

    def __init__(self, point, message="field value is not finite"):
        self.point = point
        super().__init__(f"{message} at stencil point {list(map(float, point))}")


class SingularMatrixError(GeometryError):
    """Matrix inversion requested for a (numerically) singular matrix."""

    def __init__(self, message, condition=float("inf")):
        self.condition = condition
        super().__init__(f"{message} (condition estimate {condition:.3e})")


class NotPositiveDefiniteError(GeometryError):
    """Symmetric factorization hit a non-positive pivot."""


class GaugeError(GeometryError):
    """Gauge surface is not transverse to the orbits, or a point is off the surface."""


class DegenerateOrbitError(GeometryError):
    """The orbit metric is singular: the group action is not free at this point."""


class UnsupportedOperationError(GeometryError):
    """Operation needs data (e.g. a group chart) the bundle does not provide."""


class ChartExitError(GeometryError):
    """A point or stencil left the coordinate chart."""


class ProjectionError(GeometryError):
    """Newton projection onto the gauge surface did not converge."""

    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)


class ConfigError(GeometryError):
    """Invalid run configuration."""
