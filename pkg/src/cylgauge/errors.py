"""Exception hierarchy shared by all cylgauge modules."""


class CylGaugeError(Exception):
    """Base class for every error raised by this package."""


class MeasurementError(CylGaugeError, ValueError):
    """Malformed or inconsistent measurement data."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(CylGaugeError, ValueError):
    """Invalid job configuration or synthetic part description."""


class GeometryError(CylGaugeError, ValueError):
    """Degenerate geometry, e.g. collinear interpolation sites."""


class OutOfDomainError(GeometryError):
    """Query lies outside the region an interpolator can serve."""
