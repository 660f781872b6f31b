"""Exception and warning types shared across the pipeline."""


class PipelineError(Exception):
    """Base class for all accelgest errors."""


class EmptyInput(PipelineError):
    """Raised when an input stream is too short to produce any output."""


class EdgeClipped(PipelineError):
    """Raised when a requested window would extend past the recording edge."""


class InvalidClass(PipelineError):
    """Raised when a prediction-only class is used as ground truth."""


class TooShort(PipelineError):
    """Raised when a window is too short for the requested feature."""


class ShapeError(PipelineError):
    """Raised on a dimension mismatch between a model and its input."""


class DegenerateFeature(PipelineError):
    """Raised when a feature is constant across the scaler fit set."""

    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"feature column {index} is constant across the fit set")


class DegenerateLabels(PipelineError):
    """Raised when training labels contain a single class."""


class DivergedTraining(PipelineError):
    """Raised when a training loss becomes non-finite."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"training loss became non-finite at epoch {epoch}")


class SplitInfeasible(PipelineError):
    """Raised when the requested dataset split cannot be satisfied."""


class CapacityExhausted(UserWarning):
    """Warned when prototype capacity is reached; training still returns a model."""
