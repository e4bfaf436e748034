"""Exception types shared across the package."""


class GazepsError(Exception):
    """Base class for all package errors."""


class InvalidInputError(GazepsError):
    """Malformed caller input: wrong count, non-finite values, non-unit vectors."""


class DegenerateTimingError(GazepsError):
    """Zero or negative inter-sample gap where a positive gap is required."""


class WindowUnavailableError(GazepsError):
    """Not enough recorded history to form a selection window."""


class ShapeError(GazepsError):
    """Tensor shape does not match a layer or network contract."""


class DegenerateBatchError(GazepsError):
    """Train-mode batch statistics requested over fewer than two elements."""


class TrainingDivergenceError(GazepsError):
    """Loss or gradients became non-finite during optimization."""


class CalibrationError(GazepsError):
    """Threshold calibration failed (too few or non-finite error values)."""


class ModelCorruptionError(GazepsError):
    """A model produced non-finite output or a model file failed its checksum."""


class ModelVersionError(GazepsError):
    """Model file declares an unsupported format version."""


class UsageError(GazepsError):
    """API misuse: method-tag mismatch, duplicate submission, missing model."""


class StreamError(GazepsError):
    """Sample stream violated ordering requirements."""


class DataError(GazepsError):
    """A data file is malformed or inconsistent."""
