"""Exception types shared across the package."""


class RakikitError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(RakikitError, ValueError):
    """Array extents are inconsistent with each other or with a pattern."""


class InsufficientAcsError(RakikitError, ValueError):
    """Calibration region too small to form a single training window."""

    def __init__(self, message: str, required_rows: int):
        super().__init__(message)
        self.required_rows = required_rows


class FormatError(RakikitError, ValueError):
    """Malformed on-disk file; ``offset`` is the first offending byte."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class CalibrationError(RakikitError, RuntimeError):
    """Least-squares calibration failed (e.g. singular system)."""


class UndefinedMetricError(RakikitError, ValueError):
    """Metric is undefined for the given inputs (empty mask, zero reference)."""


class PatternCompatibilityError(RakikitError, ValueError):
    """Sampling pattern incompatible with the requested operation."""
