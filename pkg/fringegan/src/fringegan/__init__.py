"""Conditional adversarial trainer for structured-light patch datasets.

The package learns a pixelwise mapping from single-frame fringe (or
demodulated) patches to packed optical-property patches.  It consumes the
dataset layout produced by the companion acquisition engine (a manifest plus
``<mode>/input`` and ``<mode>/target`` PNG folders) and writes predictions
back in a layout the same engine can score.
"""

from .errors import (
    FringeGanError,
    ShapeMismatchError,
    DatasetError,
    CheckpointError,
    InvalidConfigError,
    TrainingDivergedError,
)
from .losses import lsgan_losses, l1_loss, total_generator_loss
from .networks import (
    GeneratorConfig,
    DiscriminatorConfig,
    FusionGenerator,
    PatchDiscriminator,
    ResidualBlock,
    init_weights,
    receptive_field,
)
from .buffer import HistoryBuffer
from .data import PatchFolder, read_manifest, to_unit_range, to_symmetric_range, save_patch_png
from .train import TrainConfig, train
from .predict import load_checkpoint, predict_folder

__all__ = [
    "FringeGanError",
    "ShapeMismatchError",
    "DatasetError",
    "CheckpointError",
    "InvalidConfigError",
    "TrainingDivergedError",
    "lsgan_losses",
    "l1_loss",
    "total_generator_loss",
    "GeneratorConfig",
    "DiscriminatorConfig",
    "FusionGenerator",
    "PatchDiscriminator",
    "ResidualBlock",
    "init_weights",
    "receptive_field",
    "HistoryBuffer",
    "PatchFolder",
    "read_manifest",
    "to_unit_range",
    "to_symmetric_range",
    "save_patch_png",
    "TrainConfig",
    "train",
    "load_checkpoint",
    "predict_folder",
]
