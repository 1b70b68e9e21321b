"""Exception hierarchy shared by all simulator modules."""


class SimulatorError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(SimulatorError):
    """An argument is outside its documented domain."""


class CapacityError(SimulatorError):
    """A placement would exceed a physical machine's resources."""

    def __init__(self, resource: str, message: str):
        super().__init__(message)
        self.resource = resource


class NotFoundError(SimulatorError):
    """An id referenced an unknown VM or PM."""


class TraceFormatError(SimulatorError):
    """A trace or CSV input is malformed."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CoverageError(SimulatorError):
    """A price series does not cover a required (location, hour)."""

    def __init__(self, location: str, hour: int):
        super().__init__(f"no price for location {location!r} at hour {hour}")
        self.location = location
        self.hour = hour


class ConfigError(SimulatorError):
    """A configuration value or combination is invalid."""


class ShapeError(SimulatorError):
    """Matrix dimensions do not chain."""


class DivergenceError(SimulatorError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch
