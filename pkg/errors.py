"""
Exception hierarchy shared by the QIGL modules.
Every error also derives from the closest builtin so callers can catch either.
"""


class QiglError(Exception):
    """Base class for all errors raised by this project."""


class SizeError(QiglError, ValueError):
    """Register or buffer size out of the supported range."""


class QubitIndexError(QiglError, IndexError):
    """Qubit index outside the register."""


class ArgumentError(QiglError, ValueError):
    """Invalid argument value (e.g. CZ with control == target, c <= 0)."""


class StateError(QiglError, ValueError):
    """Statevector violates normalisation."""


class ShapeError(QiglError, ValueError):
    """Array or partition shapes do not agree."""


class RankError(QiglError, ValueError):
    """Requested more principal components than the data supports."""


class DegenerateDataError(QiglError, ValueError):
    """Data carries no variance to decompose."""


class DegenerateScaleError(QiglError, ValueError):
    """Scaling bounds collapse to a single value."""


class SampleSizeError(QiglError, ValueError):
    """Too few samples for the requested statistic."""


class NumericalDomainError(QiglError, ArithmeticError):
    """Input outside the numerical domain of an operation."""


class TrainingDivergenceError(QiglError, RuntimeError):
    """A loss became NaN or infinite."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DatasetError(QiglError, ValueError):
    """One or more image files could not be used."""

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = list(errors or [])


class EmptyDatasetError(DatasetError):
    """The dataset directory holds no usable images."""


class ImageFormatError(QiglError, ValueError):
    """File is not a supported grayscale PGM/PNG."""


class ImageIOError(QiglError, OSError):
    """Reading or writing an image or run artefact failed."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path


class ConfigError(QiglError, ValueError):
    """Run configuration is malformed or out of range."""

    def __init__(self, message, field=None, line=None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field is not None:
            location.append(f"field '{field}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")
        self.field = field
        self.line = line


class CheckpointError(QiglError, ValueError):
    """Checkpoint container is unreadable, corrupt, or from a newer version."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path
