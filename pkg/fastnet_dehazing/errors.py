"""Error hierarchy shared by every fastnet_dehazing module."""


class DehazeError(Exception):
    """Base class for all toolkit errors."""


class ImageNotFoundError(DehazeError, FileNotFoundError):
    """Raised when an image path does not exist."""


class UnsupportedImageError(DehazeError, ValueError):
    """Raised for rasters that are not 8-bit grayscale/RGB PNG or PPM."""


class CorruptImageError(DehazeError, ValueError):
    """Raised when a raster header or payload cannot be decoded."""


class ArtifactWriteError(DehazeError, OSError):
    """Raised when a checkpoint, manifest or other output file cannot be written."""


class ImageWriteError(ArtifactWriteError):
    """Raised when an image or raster cannot be written."""


class ShapeMismatchError(DehazeError, ValueError):
    """Raised when two arrays that must agree in shape do not."""


class PatchExtractionError(DehazeError, ValueError):
    """Raised when no scale of a PatchSpec yields a single patch."""


class InvalidParameterError(DehazeError, ValueError):
    """Raised when a scalar argument is outside its valid range."""


class NonFiniteValueError(DehazeError, ArithmeticError):
    """Raised when NaN or infinity shows up where finite values are required."""


class InputShapeError(DehazeError, ValueError):
    """Raised when a network input is not divisible by the encoder stride."""

    def __init__(self, message: str, required_padding: tuple = (0, 0)):
        super().__init__(message)
        self.required_padding = required_padding


class CheckpointFormatError(DehazeError, ValueError):
    """Raised for bad magic, unknown versions or truncated checkpoint files."""


class CheckpointMismatchError(DehazeError, ValueError):
    """Raised when a checkpoint does not fit the model it is loaded into."""


class ModelLoadError(DehazeError):
    """Raised when a model cannot be built or restored for a workflow."""


class TrainingDivergedError(DehazeError, ArithmeticError):
    """Raised when the training loss becomes non-finite.

    The best checkpoints and the history collected so far are attached so
    callers can keep the last good state.
    """

    def __init__(self, message: str, checkpoints=None, history=None):
        super().__init__(message)
        self.checkpoints = checkpoints
        self.history = history


class MissingTargetError(DehazeError, KeyError):
    """Raised when a loss target is absent from model outputs or truths."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class DatasetError(DehazeError, ValueError):
    """Raised for missing, mismatched or malformed dataset inputs."""


class ChecksumMismatchError(DatasetError):
    """Raised when a dataset file no longer matches its manifest checksum."""


class FmapFormatError(DehazeError, ValueError):
    """Raised for FMAP files with bad magic, version or payload length."""
