"""Metrics, paired-patch dataset export, and comparison reports.

The dataset layout written here is the hand-off contract for external
learning pipelines:

    <root>/<mode>/input/<scene>_<index>.png    8-bit RGB, 256 x 256
    <root>/<mode>/target/<scene>_<index>.png
    <root>/manifest.json

Input packing (per pixel of the raw frame): R = frame / m_dc_ref,
G = frame / m_ac_ref, both divided by the fixed input scale 4.0 and
clamped to [0, 1]; blue is zero.  Target packing: R = mua / 0.25,
G = musp / 2.5, clamped; blue is zero.  Bytes are round-half-up of
value * 255.  The manifest records every scale factor, so a reader needs
no other source of truth to undo the packing.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    DimensionMismatchError,
    EmptyMaskError,
    InvalidConfigError,
    IoError,
    KindMismatchError,
    MalformedMetadataError,
    ModeMismatchError,
    OutOfBoundsError,
    ZeroReferenceError,
)
from .images import CalibrationSet, ImageKind, OpticalPropertyMap, ScalarImage

PATCH_SIZE = 256
INPUT_SCALE = 4.0
MUA_MAX = 0.25
MUSP_MAX = 2.5


def nmae(pred: ScalarImage, ref: ScalarImage, mask: np.ndarray | None = None) -> float:
    """Normalised mean absolute error: sum|pred - ref| / sum ref.

    With a boolean mask, both sums run over selected pixels only.
    """
    if pred.shape != ref.shape:
        raise DimensionMismatchError(f"shape mismatch {pred.shape} vs {ref.shape}")
    p = pred.data
    r = ref.data
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != p.shape:
            raise DimensionMismatchError("mask shape differs from image shape")
        if not mask.any():
            raise EmptyMaskError("mask selects no pixels")
        p = p[mask]
        r = r[mask]
    denom = float(np.abs(r).sum())
    if denom == 0.0:
        raise ZeroReferenceError("reference sums to zero; NMAE undefined")
    return float(np.abs(p - r).sum()) / denom


def roi_stats(img: ScalarImage, roi: tuple[int, int, int, int]) -> tuple[float, float]:
    """(mean, std) over a rectangle given as (row0, col0, height, width)."""
    r0, c0, h, w = roi
    if h <= 0 or w <= 0:
        raise OutOfBoundsError(f"roi extents must be positive, got {roi}")
    if r0 < 0 or c0 < 0 or r0 + h > img.height or c0 + w > img.width:
        raise OutOfBoundsError(f"roi {roi} leaves the {img.shape} image")
    block = img.data[r0 : r0 + h, c0 : c0 + w]
    return float(block.mean()), float(block.std())


def centered_roi(shape: tuple[int, int], size: int = 100) -> tuple[int, int, int, int]:
    """Centred square ROI, shrunk to fit small images."""
    h = min(size, shape[0])
    w = min(size, shape[1])
    return ((shape[0] - h) // 2, (shape[1] - w) // 2, h, w)


class PatchMode(Enum):
    """Input frame type and target correction level of exported pairs.

    Inputs come either from the snapshot fringe frame (AC) or from a
    plain planar frame (DC); targets are either the as-recovered maps or
    the profile-corrected ones.
    """

    AC_RAW = "ac"
    AC_CORRECTED = "ac-prof"
    DC_RAW = "dc"
    DC_CORRECTED = "dc-prof"

    @property
    def wants_fringes(self) -> bool:
        return self in (PatchMode.AC_RAW, PatchMode.AC_CORRECTED)

    @property
    def wants_corrected_targets(self) -> bool:
        return self in (PatchMode.AC_CORRECTED, PatchMode.DC_CORRECTED)


@dataclass(frozen=True)
class PatchPair:
    """One exported input/target pair, values already packed to [0, 1]."""

    input_rgb: np.ndarray
    target_rgb: np.ndarray
    origin: tuple[int, int]
    mode: PatchMode
    scene: str
    index: int


@dataclass(frozen=True)
class StridePolicy:
    """Patch placement: 'random' draws `count` origins from `seed`;
    'tiled' lays non-overlapping patches from the top-left corner."""

    kind: str
    seed: int = 0
    count: int = 0

    def __post_init__(self):
        if self.kind not in ("random", "tiled"):
            raise InvalidConfigError(f"unknown stride policy {self.kind!r}")
        if self.kind == "random" and self.count < 1:
            raise InvalidConfigError("random policy needs count >= 1")

    def origins(self, shape: tuple[int, int]) -> list[tuple[int, int]]:
        max_r = shape[0] - PATCH_SIZE
        max_c = shape[1] - PATCH_SIZE
        if max_r < 0 or max_c < 0:
            raise DimensionMismatchError(
                f"frame {shape} smaller than the {PATCH_SIZE} px patch"
            )
        if self.kind == "tiled":
            return [
                (r, c)
                for r in range(0, max_r + 1, PATCH_SIZE)
                for c in range(0, max_c + 1, PATCH_SIZE)
            ]
        rng = np.random.default_rng(self.seed)
        return [
            (int(rng.integers(0, max_r + 1)), int(rng.integers(0, max_c + 1)))
            for _ in range(self.count)
        ]


def _to_bytes(values: np.ndarray) -> np.ndarray:
    """Round-half-up byte quantisation of [0, 1] floats."""
    return np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def pack_input(frame: ScalarImage, cal: CalibrationSet) -> np.ndarray:
    """Frame normalised by the reference amplitudes into RGB floats [0, 1]."""
    if frame.kind is not ImageKind.INTENSITY:
        raise KindMismatchError("input packing expects an intensity frame")
    if frame.shape != cal.m_dc_ref.shape:
        raise DimensionMismatchError("frame geometry differs from calibration")
    rgb = np.zeros(frame.shape + (3,))
    rgb[..., 0] = frame.data / cal.m_dc_ref.data / INPUT_SCALE
    rgb[..., 1] = frame.data / cal.m_ac_ref.data / INPUT_SCALE
    return np.clip(rgb, 0.0, 1.0)


def pack_target(op_map: OpticalPropertyMap) -> np.ndarray:
    """Property maps normalised by the fixed full-scale values."""
    rgb = np.zeros(op_map.mua.shape + (3,))
    rgb[..., 0] = op_map.mua.data / MUA_MAX
    rgb[..., 1] = op_map.musp.data / MUSP_MAX
    return np.clip(rgb, 0.0, 1.0)


def _merge_manifest(root: Path, new_patches: list[dict], pixel_pitch: float) -> None:
    manifest_path = root / "manifest.json"
    if manifest_path.exists():
        try:
            manifest = json.loads(manifest_path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise MalformedMetadataError(f"existing manifest unreadable: {exc}") from exc
        if manifest.get("input_scale") != INPUT_SCALE or manifest.get("mua_max") != MUA_MAX:
            raise MalformedMetadataError("existing manifest has different scales")
    else:
        manifest = {
            "patch_size": PATCH_SIZE,
            "input_scale": INPUT_SCALE,
            "mua_max": MUA_MAX,
            "musp_max": MUSP_MAX,
            "pixel_pitch_mm": pixel_pitch,
            "patches": [],
        }
    seen = {(p["mode"], p["scene"], p["index"]) for p in manifest["patches"]}
    for entry in new_patches:
        key = (entry["mode"], entry["scene"], entry["index"])
        if key in seen:
            raise InvalidConfigError(f"duplicate patch {key} in dataset")
        manifest["patches"].append(entry)
    try:
        manifest_path.write_text(json.dumps(manifest, indent=1))
    except OSError as exc:
        raise IoError(f"cannot write manifest: {exc}") from exc


def export_patches(
    frame: ScalarImage,
    op_map: OpticalPropertyMap,
    cal: CalibrationSet,
    mode: PatchMode,
    out_root: str | Path,
    scene: str,
    policy: StridePolicy,
    frame_fx: float,
    start_index: int = 0,
) -> list[PatchPair]:
    """Cut paired patches from one frame and write them into the layout.

    frame_fx is the projected frequency the frame was recorded at; AC
    modes demand fringes (fx > 0), DC modes a planar frame (fx == 0), and
    the target map's correction level must match the mode, otherwise
    ModeMismatchError.
    """
    if frame.shape != op_map.mua.shape:
        raise DimensionMismatchError("frame and target map geometry differ")
    if mode.wants_fringes != (frame_fx > 0.0):
        raise ModeMismatchError(
            f"mode {mode.value} expects frame_fx {'> 0' if mode.wants_fringes else '== 0'}, "
            f"got {frame_fx}"
        )
    if mode.wants_corrected_targets != op_map.profile_corrected:
        raise ModeMismatchError(
            f"mode {mode.value} expects profile_corrected="
            f"{mode.wants_corrected_targets}, map has {op_map.profile_corrected}"
        )

    root = Path(out_root)
    input_dir = root / mode.value / "input"
    target_dir = root / mode.value / "target"
    input_dir.mkdir(parents=True, exist_ok=True)
    target_dir.mkdir(parents=True, exist_ok=True)

    full_input = pack_input(frame, cal)
    full_target = pack_target(op_map)

    pairs = []
    entries = []
    for offset, (r, c) in enumerate(policy.origins(frame.shape)):
        index = start_index + offset
        sl = np.s_[r : r + PATCH_SIZE, c : c + PATCH_SIZE]
        pair = PatchPair(
            input_rgb=full_input[sl],
            target_rgb=full_target[sl],
            origin=(r, c),
            mode=mode,
            scene=scene,
            index=index,
        )
        name = f"{scene}_{index}.png"
        try:
            Image.fromarray(_to_bytes(pair.input_rgb)).save(input_dir / name)
            Image.fromarray(_to_bytes(pair.target_rgb)).save(target_dir / name)
        except OSError as exc:
            raise IoError(f"cannot write patch {name}: {exc}") from exc
        entries.append(
            {
                "mode": mode.value,
                "scene": scene,
                "index": index,
                "origin": [r, c],
                "input": str(Path(mode.value) / "input" / name),
                "target": str(Path(mode.value) / "target" / name),
            }
        )
        pairs.append(pair)
    _merge_manifest(root, entries, frame.pixel_pitch)
    return pairs


def read_manifest(root: str | Path) -> dict:
    path = Path(root) / "manifest.json"
    try:
        manifest = json.loads(path.read_text())
    except OSError as exc:
        raise IoError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedMetadataError(f"manifest {path} is not valid JSON: {exc}") from exc
    for key in ("patch_size", "input_scale", "mua_max", "musp_max", "patches"):
        if key not in manifest:
            raise MalformedMetadataError(f"manifest missing field {key!r}")
    return manifest


def import_prediction(
    path: str | Path, manifest: dict, valid: np.ndarray | None = None
) -> OpticalPropertyMap:
    """Decode a predicted RGB patch back to physical property maps.

    Uses the manifest's scale factors; the green/red packing mirrors
    :func:`pack_target`.
    """
    try:
        rgb = np.asarray(Image.open(path), dtype=np.float64) / 255.0
    except OSError as exc:
        raise IoError(f"cannot read prediction {path}: {exc}") from exc
    if rgb.ndim != 3 or rgb.shape[2] < 2:
        raise MalformedMetadataError(f"{path} is not an RGB image")
    pitch = float(manifest.get("pixel_pitch_mm", 0.278))
    mua = rgb[..., 0] * float(manifest["mua_max"])
    musp = rgb[..., 1] * float(manifest["musp_max"])
    if valid is None:
        valid = np.ones(mua.shape, dtype=bool)
    return OpticalPropertyMap(
        mua=ScalarImage(mua, ImageKind.ABSORPTION, pitch),
        musp=ScalarImage(musp, ImageKind.REDUCED_SCATTERING, pitch),
        valid=valid,
    )


@dataclass(frozen=True)
class ComparisonReport:
    """Quality of one recovered map against its reference."""

    scene: str
    method: str
    nmae_mua: float
    nmae_musp: float
    roi_mean_mua: float
    roi_mean_musp: float
    valid_fraction: float

    CSV_FIELDS = (
        "scene",
        "method",
        "nmae_mua",
        "nmae_musp",
        "roi_mean_mua",
        "roi_mean_musp",
        "valid_fraction",
    )

    def csv_row(self) -> list[str]:
        return [
            self.scene,
            self.method,
            f"{self.nmae_mua:.6f}",
            f"{self.nmae_musp:.6f}",
            f"{self.roi_mean_mua:.6f}",
            f"{self.roi_mean_musp:.6f}",
            f"{self.valid_fraction:.6f}",
        ]


def compare_report(
    pred: OpticalPropertyMap,
    ref: OpticalPropertyMap,
    scene: str,
    method: str,
    roi: tuple[int, int, int, int] | None = None,
) -> ComparisonReport:
    """NMAE over jointly valid pixels plus ROI means of the prediction.

    The ROI defaults to a centred square of up to 100 px.
    """
    if pred.mua.shape != ref.mua.shape:
        raise DimensionMismatchError("prediction and reference geometry differ")
    mask = pred.valid & ref.valid
    if not mask.any():
        raise EmptyMaskError("no jointly valid pixels to compare")
    if roi is None:
        roi = centered_roi(pred.mua.shape)
    return ComparisonReport(
        scene=scene,
        method=method,
        nmae_mua=nmae(pred.mua, ref.mua, mask),
        nmae_musp=nmae(pred.musp, ref.musp, mask),
        roi_mean_mua=roi_stats(pred.mua, roi)[0],
        roi_mean_musp=roi_stats(pred.musp, roi)[0],
        valid_fraction=pred.valid_fraction,
    )


def write_report_csv(reports: list[ComparisonReport], path: str | Path) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(ComparisonReport.CSV_FIELDS)
            for report in reports:
                writer.writerow(report.csv_row())
    except OSError as exc:
        raise IoError(f"cannot write report {path}: {exc}") from exc
    return path
