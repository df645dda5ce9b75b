"""Core image containers and pixel-level reflectance arithmetic.

All processing in this package operates on :class:`ScalarImage`: a 2-D
float64 array tagged with a physical kind and a pixel pitch.  Images are
row-major with the origin at the top-left corner; the x axis (columns)
points right and carries the fringe modulation direction.

Units
-----
pixel_pitch     mm per pixel
Absorption      mm^-1
ReducedScattering  mm^-1
Height          mm
Phase           rad
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    DimensionMismatchError,
    EmptyListError,
    InvalidImageError,
    IoError,
    KindMismatchError,
    MalformedMetadataError,
    NonPositiveReferenceError,
)

log = logging.getLogger(__name__)

DEFAULT_PIXEL_PITCH_MM = 0.278

# Physical diffuse reflectance cannot exceed 1; measured values may drift
# slightly above it through noise and calibration error.  Values in
# (1, 1.5] are tolerated and logged, anything above 1.5 is rejected.
REFLECTANCE_HARD_LIMIT = 1.5


class ImageKind(Enum):
    INTENSITY = "intensity"
    AMPLITUDE = "amplitude"
    REFLECTANCE = "reflectance"
    ABSORPTION = "absorption"
    REDUCED_SCATTERING = "reduced_scattering"
    HEIGHT = "height"
    PHASE = "phase"


# Intensity is deliberately absent: raw counts are non-negative, but
# background-subtracted or zero-mean test signals are legitimate inputs
# to the Fourier filtering stages.
_NON_NEGATIVE_KINDS = frozenset(
    {
        ImageKind.AMPLITUDE,
        ImageKind.REFLECTANCE,
        ImageKind.ABSORPTION,
        ImageKind.REDUCED_SCATTERING,
    }
)


@dataclass(frozen=True)
class ScalarImage:
    """One scalar quantity sampled on a regular pixel grid.

    Parameters
    ----------
    data : ndarray
        2-D array, converted to read-only float64.
    kind : ImageKind
        Physical meaning of the pixel values; decides which value
        invariants are enforced.
    pixel_pitch : float
        Physical size of one pixel in mm.
    """

    data: np.ndarray
    kind: ImageKind
    pixel_pitch: float = DEFAULT_PIXEL_PITCH_MM

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidImageError(f"image data must be 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidImageError("image data contains NaN or infinity")
        if not isinstance(self.kind, ImageKind):
            raise KindMismatchError(f"kind must be an ImageKind, got {self.kind!r}")
        if not (self.pixel_pitch > 0.0 and np.isfinite(self.pixel_pitch)):
            raise InvalidImageError(f"pixel_pitch must be positive, got {self.pixel_pitch}")
        if self.kind in _NON_NEGATIVE_KINDS and arr.min() < 0.0:
            raise InvalidImageError(f"{self.kind.value} image contains negative values")
        if self.kind is ImageKind.REFLECTANCE:
            peak = arr.max()
            if peak > REFLECTANCE_HARD_LIMIT:
                raise InvalidImageError(
                    f"reflectance peak {peak:.4g} exceeds hard limit {REFLECTANCE_HARD_LIMIT}"
                )
            if peak > 1.0:
                n_above = int(np.count_nonzero(arr > 1.0))
                log.warning(
                    "reflectance image has %d pixels above 1.0 (peak %.4g); "
                    "tolerated but physically suspect",
                    n_above,
                    peak,
                )
        arr = arr.copy() if arr is self.data or not arr.flags.owndata else arr
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def x_coords_mm(self) -> np.ndarray:
        """Physical x (column) coordinate of each pixel centre, in mm."""
        return np.arange(self.width, dtype=np.float64) * self.pixel_pitch

    def with_data(self, data: np.ndarray, kind: ImageKind | None = None) -> "ScalarImage":
        """New image sharing this image's pitch, with new pixels and optional new kind."""
        return ScalarImage(data, kind if kind is not None else self.kind, self.pixel_pitch)


def same_geometry(a: ScalarImage, b: ScalarImage) -> bool:
    return a.shape == b.shape and a.pixel_pitch == b.pixel_pitch


def require_same_geometry(*images: ScalarImage) -> None:
    first = images[0]
    for img in images[1:]:
        if not same_geometry(first, img):
            raise DimensionMismatchError(
                f"images disagree in geometry: {first.shape}@{first.pixel_pitch}mm "
                f"vs {img.shape}@{img.pixel_pitch}mm"
            )


@dataclass(frozen=True)
class CalibrationSet:
    """Demodulated amplitudes of a reference phantom plus its predicted reflectance.

    m_dc_ref / m_ac_ref are the DC and AC demodulated amplitude images of
    the calibration phantom.  rd_dc_predicted / rd_ac_predicted are the
    model-predicted diffuse reflectances of that phantom at the DC and AC
    spatial frequencies, both strictly inside (0, 1).
    """

    m_dc_ref: ScalarImage
    m_ac_ref: ScalarImage
    rd_dc_predicted: float
    rd_ac_predicted: float
    ref_mua: float
    ref_musp: float
    wavelength_nm: float = 660.0

    def __post_init__(self):
        if self.m_dc_ref.kind is not ImageKind.AMPLITUDE:
            raise KindMismatchError("m_dc_ref must be an amplitude image")
        if self.m_ac_ref.kind is not ImageKind.AMPLITUDE:
            raise KindMismatchError("m_ac_ref must be an amplitude image")
        require_same_geometry(self.m_dc_ref, self.m_ac_ref)
        for name, value in (
            ("rd_dc_predicted", self.rd_dc_predicted),
            ("rd_ac_predicted", self.rd_ac_predicted),
        ):
            if not (0.0 < value < 1.0):
                raise InvalidImageError(f"{name} must lie in (0, 1), got {value}")
        if self.m_dc_ref.data.min() <= 0.0 or self.m_ac_ref.data.min() <= 0.0:
            raise NonPositiveReferenceError("reference amplitudes must be positive everywhere")
        if self.ref_mua < 0.0 or self.ref_musp <= 0.0:
            raise InvalidImageError("reference optical properties out of range")


@dataclass(frozen=True)
class OpticalPropertyMap:
    """Recovered absorption and reduced scattering, with per-pixel validity.

    valid[i, j] is False where the inversion clamped to the table edge,
    failed to converge, or the pixel was excluded (filter borders, extreme
    tilt).  Invalid pixels still hold best-effort values so downstream
    statistics can mask rather than special-case them.
    """

    mua: ScalarImage
    musp: ScalarImage
    valid: np.ndarray
    profile_corrected: bool = False

    def __post_init__(self):
        if self.mua.kind is not ImageKind.ABSORPTION:
            raise KindMismatchError("mua must be an absorption image")
        if self.musp.kind is not ImageKind.REDUCED_SCATTERING:
            raise KindMismatchError("musp must be a reduced-scattering image")
        require_same_geometry(self.mua, self.musp)
        mask = np.asarray(self.valid, dtype=bool)
        if mask.shape != self.mua.shape:
            raise DimensionMismatchError(
                f"validity mask shape {mask.shape} != image shape {self.mua.shape}"
            )
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "valid", mask)

    @property
    def valid_fraction(self) -> float:
        return float(np.count_nonzero(self.valid)) / self.valid.size


def compute_diffuse_reflectance(
    m: ScalarImage, m_ref: ScalarImage, rd_predicted: float
) -> ScalarImage:
    """Calibrated diffuse reflectance of a sample against a reference phantom.

    Rd(x) = M(x) / M_ref(x) * rd_predicted, where M and M_ref are the
    demodulated amplitudes of sample and reference at the same spatial
    frequency and rd_predicted is the model reflectance of the reference.
    """
    require_same_geometry(m, m_ref)
    if m_ref.data.min() <= 0.0:
        raise NonPositiveReferenceError("reference amplitude must be positive everywhere")
    if not (0.0 < rd_predicted < 1.0):
        raise InvalidImageError(f"rd_predicted must lie in (0, 1), got {rd_predicted}")
    rd = m.data / m_ref.data * rd_predicted
    return ScalarImage(rd, ImageKind.REFLECTANCE, m.pixel_pitch)


def mean_of_images(images: list[ScalarImage]) -> ScalarImage:
    """Pixel-wise mean of images sharing geometry and kind."""
    if len(images) == 0:
        raise EmptyListError("mean_of_images needs at least one image")
    first = images[0]
    for img in images[1:]:
        if img.kind is not first.kind:
            raise KindMismatchError(
                f"cannot average {img.kind.value} with {first.kind.value}"
            )
    require_same_geometry(*images)
    stack = np.stack([img.data for img in images])
    return first.with_data(stack.mean(axis=0))


# ---------------------------------------------------------------------------
# File formats.
#
# Two encodings, both with a JSON sidecar at <path>.json:
#   png16  -- 16-bit grayscale PNG; counts = round-half-up(value * scale)
#   raw64  -- little-endian float64, row-major, lossless
# The sidecar records geometry, kind and scale so a file round-trips to an
# identical ScalarImage without out-of-band knowledge.
# ---------------------------------------------------------------------------

FORMAT_PNG16 = "png16"
FORMAT_RAW64 = "raw64"

_DEFAULT_PNG_SCALE = {
    ImageKind.REFLECTANCE: 65535.0 / REFLECTANCE_HARD_LIMIT,
    ImageKind.INTENSITY: 1.0,
    ImageKind.AMPLITUDE: 1.0,
}


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def save_image(
    img: ScalarImage,
    path: str | Path,
    fmt: str = FORMAT_RAW64,
    scale: float | None = None,
    wavelength_nm: float | None = None,
) -> Path:
    """Write an image plus JSON sidecar; returns the data file path.

    For png16 the scale is counts per physical unit.  When omitted it
    defaults per kind (reflectance fills the 16-bit range at the hard
    limit, intensity and amplitude store raw counts); other kinds require
    an explicit scale.  Counts are clamped to [0, 65535].
    """
    path = Path(path)
    if fmt == FORMAT_PNG16:
        if scale is None:
            scale = _DEFAULT_PNG_SCALE.get(img.kind)
            if scale is None:
                raise InvalidImageError(
                    f"png16 needs an explicit scale for kind {img.kind.value}"
                )
        if img.data.min() < 0.0:
            raise IoError("png16 cannot encode negative values; use raw64")
        counts = np.floor(img.data * scale + 0.5)
        counts = np.clip(counts, 0, 65535).astype(np.uint16)
        try:
            Image.fromarray(counts).save(path, format="PNG")
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc
    elif fmt == FORMAT_RAW64:
        scale = 1.0
        try:
            path.write_bytes(img.data.astype("<f8").tobytes())
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc
    else:
        raise IoError(f"unknown image format {fmt!r}")

    meta = {
        "format": fmt,
        "width": img.width,
        "height": img.height,
        "pixel_pitch_mm": img.pixel_pitch,
        "kind": img.kind.value,
        "scale": float(scale),
    }
    if wavelength_nm is not None:
        meta["wavelength_nm"] = float(wavelength_nm)
    try:
        _sidecar_path(path).write_text(json.dumps(meta, indent=1))
    except OSError as exc:
        raise IoError(f"cannot write sidecar for {path}: {exc}") from exc
    return path


def load_image(path: str | Path, expected_kind: ImageKind | None = None) -> ScalarImage:
    """Read an image written by :func:`save_image`.

    Raises KindMismatchError when expected_kind is given and disagrees
    with the sidecar, MalformedMetadataError for broken sidecars.
    """
    path = Path(path)
    sidecar = _sidecar_path(path)
    try:
        meta = json.loads(sidecar.read_text())
    except OSError as exc:
        raise IoError(f"cannot read sidecar {sidecar}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedMetadataError(f"sidecar {sidecar} is not valid JSON: {exc}") from exc

    required = ("format", "width", "height", "pixel_pitch_mm", "kind", "scale")
    missing = [key for key in required if key not in meta]
    if missing:
        raise MalformedMetadataError(f"sidecar {sidecar} missing fields {missing}")
    try:
        kind = ImageKind(meta["kind"])
    except ValueError as exc:
        raise MalformedMetadataError(f"unknown image kind {meta['kind']!r}") from exc
    if expected_kind is not None and kind is not expected_kind:
        raise KindMismatchError(f"expected {expected_kind.value}, file holds {kind.value}")

    shape = (int(meta["height"]), int(meta["width"]))
    fmt = meta["format"]
    try:
        if fmt == FORMAT_PNG16:
            counts = np.asarray(Image.open(path), dtype=np.float64)
            data = counts / float(meta["scale"])
        elif fmt == FORMAT_RAW64:
            raw = np.frombuffer(path.read_bytes(), dtype="<f8")
            if raw.size != shape[0] * shape[1]:
                raise MalformedMetadataError(
                    f"{path}: payload holds {raw.size} values, sidecar says {shape}"
                )
            data = raw.reshape(shape)
        else:
            raise MalformedMetadataError(f"unknown image format {fmt!r} in sidecar")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if data.shape != shape:
        raise MalformedMetadataError(f"{path}: data shape {data.shape} != sidecar {shape}")
    return ScalarImage(data, kind, float(meta["pixel_pitch_mm"]))
