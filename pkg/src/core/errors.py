"""Domain errors. Each subclasses the builtin a caller would naturally catch."""

from typing import Sequence


class RasterShapeError(ValueError):
    """Rasters that must be co-registered disagree in size."""

    def __init__(self, message: str, sample_id: str | None = None):
        super().__init__(message)
        self.sample_id = sample_id


class SplitNotFoundError(FileNotFoundError):
    """A dataset split directory does not exist."""

    def __init__(self, root: str, split: str):
        super().__init__(f"Split '{split}' not found under {root}")
        self.split = split


class MissingSampleFileError(FileNotFoundError):
    """One of the A/B/label siblings of a sample is missing."""

    def __init__(self, sample_id: str, path: str):
        super().__init__(f"Sample '{sample_id}' is missing {path}")
        self.sample_id = sample_id


class EmptySplitError(ValueError):
    """Evaluation requested on a split without samples."""


class ConfigError(ValueError):
    """Training configuration failed validation."""


class PretrainedWeightsUnavailableError(RuntimeError):
    """Published backbone weights could not be loaded."""


class CheckpointMismatchError(RuntimeError):
    """Checkpoint parameter names do not match the model."""

    def __init__(self, missing: Sequence[str], unexpected: Sequence[str]):
        self.missing = list(missing)
        self.unexpected = list(unexpected)
        super().__init__(
            f"Incompatible checkpoint: missing={self.missing} unexpected={self.unexpected}"
        )


class NonFiniteLossError(FloatingPointError):
    """Training loss became NaN or infinite."""

    def __init__(self, step: int, value: float):
        super().__init__(f"Non-finite loss {value} at step {step}")
        self.step = step
        self.value = value
