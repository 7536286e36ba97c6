"""Exception hierarchy shared by all tpmon modules."""


class TpmonError(Exception):
    """Base class for every error raised by this package."""


class DomainError(TpmonError, ValueError):
    """An argument lies outside the domain of an operation."""


class StabilityError(DomainError):
    """Explicit integration requested with a step above the stability limit."""


class TraceValidationError(DomainError):
    """A trace step is inconsistent with the core clock or the floorplan."""


class ConfigError(DomainError):
    """Scenario or parameter file failed to parse or validate."""


class ReadoutError(TpmonError):
    """A monitor readout was requested while its inputs were undefined."""


class CalibrationError(TpmonError):
    """Calibration targets admit no consistent parameter set.

    ``residuals`` maps each target name to its residual in degrees C
    (NaN where parameters could not be formed at all).
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = dict(residuals or {})
