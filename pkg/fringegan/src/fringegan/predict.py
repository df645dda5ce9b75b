"""Inference: load a checkpoint and write predicted patches.

Predictions are written flat as <out_dir>/<scene>_<index>.png so the
acquisition engine's scorer can match them against the dataset manifest by
file name.  The generator's Tanh output is remapped from [-1, 1] to [0, 1]
before the bytes are written, inverting the remap recorded in the
checkpoint metadata.
"""

from pathlib import Path

import torch

from .data import PatchFolder, save_patch_png, to_unit_range
from .errors import CheckpointError
from .networks import GeneratorConfig, FusionGenerator

REQUIRED_CHECKPOINT_KEYS = (
    "generator_state",
    "generator_config",
    "train_config",
    "input_range",
    "scales",
)


def load_checkpoint(path):
    """Read a checkpoint file and validate its self-describing metadata."""
    path = Path(path)
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except (OSError, RuntimeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise CheckpointError(f"checkpoint {path} is not a payload dictionary")
    for key in REQUIRED_CHECKPOINT_KEYS:
        if key not in payload:
            raise CheckpointError(f"checkpoint {path} missing field {key!r}")
    return payload


def build_generator(payload):
    """Reconstruct the generator a checkpoint was saved from."""
    try:
        config = GeneratorConfig(**payload["generator_config"])
    except TypeError as exc:
        raise CheckpointError(f"unusable generator config: {exc}") from exc
    generator = FusionGenerator(config)
    try:
        generator.load_state_dict(payload["generator_state"])
    except RuntimeError as exc:
        raise CheckpointError(f"weights do not fit the recorded config: {exc}") from exc
    generator.eval()
    return generator


def predict_folder(checkpoint_path, dataset_root, out_dir, mode=None):
    """Predict every patch of one dataset mode; returns the written paths.

    The dataset must use the same patch size the checkpoint was trained
    on; a different size means the checkpoint does not belong to this
    dataset family.
    """
    payload = load_checkpoint(checkpoint_path)
    generator = build_generator(payload)
    if mode is None:
        mode = payload["train_config"].get("mode", "ac")
    dataset = PatchFolder(dataset_root, mode)
    if int(dataset.manifest["patch_size"]) != int(payload["scales"]["patch_size"]):
        raise CheckpointError(
            f"checkpoint trained on {payload['scales']['patch_size']}-pixel patches, "
            f"dataset has {dataset.manifest['patch_size']}"
        )
    out = Path(out_dir)
    written = []
    with torch.no_grad():
        for i in range(len(dataset)):
            x, _, name = dataset[i]
            pred = generator(x.unsqueeze(0))[0]
            path = out / f"{name}.png"
            save_patch_png(path, to_unit_range(pred))
            written.append(path)
    return written
