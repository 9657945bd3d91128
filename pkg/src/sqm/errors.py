"""Exception hierarchy shared across the toolkit.

Grouped by CLI exit code: configuration (2), data (3), numerical (4).
"""


class SqmError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SqmError):
    """Invalid or inconsistent run configuration."""


class EncodingError(SqmError):
    """Image carries the wrong color encoding for the requested operation."""


class DimensionError(SqmError):
    """Image too small or mis-shaped for the requested operation."""


class ShapeMismatchError(SqmError):
    """Arrays or curves that must share a shape/grid do not."""


class UsageError(SqmError):
    """Inputs are individually valid but combined incorrectly."""


class DegenerateInputError(SqmError):
    """An input is singular where the math requires it not to be."""


class DomainError(SqmError):
    """Argument outside the mathematical domain of the operation."""


class CalibrationError(SqmError):
    """Calibration cannot be performed (e.g. zero-mean raw scores)."""


class GenerationError(SqmError):
    """Procedural target generation failed to terminate."""


class PipelineFault(SqmError):
    """Non-finite values produced inside the capture pipeline."""

    def __init__(self, stage: str, message: str | None = None):
        self.stage = stage
        super().__init__(message or f"non-finite values after stage '{stage}'")
