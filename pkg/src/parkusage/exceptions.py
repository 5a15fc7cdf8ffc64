"""Exception hierarchy shared by every stage of the pipeline."""


class ParkUsageError(Exception):
    """Base class for all errors raised by this package."""


class InputError(ParkUsageError):
    """A source file could not be opened or read."""


class FormatError(ParkUsageError, ValueError):
    """A source was readable but does not look like the expected format."""


class ConfigError(ParkUsageError, ValueError):
    """A parameter or configuration object is invalid."""


class ParameterError(ConfigError):
    """An algorithm parameter is out of range for the given data."""


class FitError(ParkUsageError, ValueError):
    """Too few usable observations to fit a model."""


class SpecError(ConfigError):
    """A synthetic-data specification is infeasible."""


class PipelineError(ParkUsageError):
    """A pipeline stage failed; ``stage`` names the failing stage."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
