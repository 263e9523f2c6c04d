"""Exception hierarchy shared across the toolkit."""


class ChokitError(Exception):
    """Base class for all chokit errors."""


class ConfigError(ChokitError):
    """Malformed or inconsistent experiment configuration."""


class DatasetError(ChokitError):
    """Base class for dataset construction and I/O problems."""


class DatasetFormatError(DatasetError):
    """A dataset file does not follow the documented binary/manifest layout."""


class DimensionMismatchError(DatasetError):
    """Image dimensions disagree with the declared grid side."""


class LabelImbalanceError(DatasetError):
    """Class counts differ by more than the declared tolerance."""


class UnreadableImageError(DatasetError):
    """A referenced image file is missing or cannot be decoded."""


class TrainingDivergedError(ChokitError):
    """Optimization produced a non-finite loss; carries the epoch index."""

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training loss became non-finite at epoch {epoch} (loss={loss!r})")
        self.epoch = epoch
        self.loss = loss
