"""Reading and writing the paired-patch dataset layout.

The acquisition engine exports datasets as

    <root>/manifest.json
    <root>/<mode>/input/<scene>_<index>.png
    <root>/<mode>/target/<scene>_<index>.png

with 8-bit RGB patches whose channels encode scaled physical quantities.
This module maps those bytes to the network's symmetric value range and
back.  Byte value v becomes v / 255 in [0, 1] and then 2 x - 1 in [-1, 1];
on the way out, a unit-range value v is stored as floor(255 v + 0.5).
"""

import json
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .errors import DatasetError

REQUIRED_MANIFEST_KEYS = ("patch_size", "mua_max", "musp_max", "patches")


def to_symmetric_range(x):
    """Map values in [0, 1] to [-1, 1]."""
    return 2.0 * x - 1.0


def to_unit_range(y):
    """Map values in [-1, 1] back to [0, 1], clamping stray endpoints."""
    return torch.clamp((y + 1.0) / 2.0, 0.0, 1.0)


def read_manifest(root):
    path = Path(root) / "manifest.json"
    try:
        manifest = json.loads(path.read_text())
    except OSError as exc:
        raise DatasetError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DatasetError(f"manifest {path} is not valid JSON: {exc}") from exc
    for key in REQUIRED_MANIFEST_KEYS:
        if key not in manifest:
            raise DatasetError(f"manifest missing field {key!r}")
    return manifest


def _load_rgb(path, patch_size):
    try:
        with Image.open(path) as img:
            arr = np.asarray(img)
    except OSError as exc:
        raise DatasetError(f"cannot read patch {path}: {exc}") from exc
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise DatasetError(f"patch {path} is not 8-bit RGB")
    if arr.shape[0] != patch_size or arr.shape[1] != patch_size:
        raise DatasetError(
            f"patch {path} is {arr.shape[0]}x{arr.shape[1]}, manifest says {patch_size}"
        )
    unit = arr.astype(np.float32) / 255.0
    chw = np.transpose(to_symmetric_range(unit), (2, 0, 1))
    return torch.from_numpy(np.ascontiguousarray(chw))


class PatchFolder:
    """All (input, target) pairs of one mode of a dataset, in a fixed order.

    Items are (input, target, name) with tensors shaped (3, s, s), values
    in [-1, 1], and name the patch file stem, so predictions written as
    <name>.png line up with the manifest for scoring.
    """

    def __init__(self, root, mode):
        self.root = Path(root)
        self.mode = mode
        self.manifest = read_manifest(root)
        self.patch_size = int(self.manifest["patch_size"])
        self.entries = sorted(
            (p for p in self.manifest["patches"] if p["mode"] == mode),
            key=lambda p: (p["scene"], p["index"]),
        )
        if not self.entries:
            raise DatasetError(f"dataset at {root} has no patches of mode {mode!r}")

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        entry = self.entries[i]
        x = _load_rgb(self.root / entry["input"], self.patch_size)
        y = _load_rgb(self.root / entry["target"], self.patch_size)
        return x, y, Path(entry["target"]).stem


def save_patch_png(path, unit_rgb):
    """Write a (3, h, w) tensor with values in [0, 1] as an 8-bit RGB PNG."""
    arr = unit_rgb.detach().cpu().numpy()
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise DatasetError(f"expected a (3, h, w) tensor, got shape {arr.shape}")
    hwc = np.transpose(np.clip(arr, 0.0, 1.0), (1, 2, 0))
    data = np.floor(hwc * 255.0 + 0.5).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        Image.fromarray(data).save(path)
    except OSError as exc:
        raise DatasetError(f"cannot write {path}: {exc}") from exc
