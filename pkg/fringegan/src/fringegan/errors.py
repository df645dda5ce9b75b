"""Exception types raised by the trainer."""


class FringeGanError(Exception):
    """Base class for every error this package raises on purpose."""


class ShapeMismatchError(FringeGanError):
    """Two tensors that must agree in shape do not."""


class DatasetError(FringeGanError):
    """The dataset directory or manifest is malformed."""


class CheckpointError(FringeGanError):
    """A checkpoint file is missing required entries or is inconsistent."""


class InvalidConfigError(FringeGanError):
    """A configuration value is out of its legal range."""


class TrainingDivergedError(FringeGanError):
    """A loss became non-finite; training state was dumped for inspection."""
