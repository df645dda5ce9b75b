"""Six-image structured-illumination processing.

The measurement consists of two phase triplets: three frames at one AC
spatial frequency and three at DC (fx = 0), each triplet phase-stepped by
2 pi / 3.  Demodulation reduces each triplet to an amplitude image,
calibration against a phantom of known properties turns amplitudes into
diffuse reflectance, and the reflectance pair is inverted through the
lookup table pixel by pixel.

A second, lower-frequency triplet can be projected for fringe
profilometry; the recovered height and slope then correct the sample
amplitudes for illumination falloff and surface tilt before inversion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AngleOverflowError,
    DimensionMismatchError,
    InvalidConfigError,
    KindMismatchError,
    NonMonotonicError,
)
from .images import (
    CalibrationSet,
    ImageKind,
    OpticalPropertyMap,
    ScalarImage,
    compute_diffuse_reflectance,
    mean_of_images,
    require_same_geometry,
)
from .lut import LookupTable, lut_forward, lut_invert_map

DEFAULT_PHASES = (0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0)

# Tilt beyond which the cosine correction amplifies noise more than it
# corrects signal; processing refuses rather than silently degrades.
MAX_SURFACE_ANGLE_RAD = np.deg2rad(75.0)


def _check_triplet(frames, label: str) -> tuple[ScalarImage, ScalarImage, ScalarImage]:
    frames = tuple(frames)
    if len(frames) != 3:
        raise InvalidConfigError(f"{label} needs exactly 3 frames, got {len(frames)}")
    for f in frames:
        if f.kind is not ImageKind.INTENSITY:
            raise KindMismatchError(f"{label} frames must be intensity images")
    require_same_geometry(*frames)
    return frames


@dataclass(frozen=True)
class FrameSet:
    """Two phase-stepped triplets: AC at fx_ac cycles/mm and DC at fx = 0."""

    dc_frames: tuple[ScalarImage, ScalarImage, ScalarImage]
    ac_frames: tuple[ScalarImage, ScalarImage, ScalarImage]
    fx_ac: float = 0.2
    phases: tuple[float, float, float] = DEFAULT_PHASES

    def __post_init__(self):
        object.__setattr__(self, "dc_frames", _check_triplet(self.dc_frames, "dc_frames"))
        object.__setattr__(self, "ac_frames", _check_triplet(self.ac_frames, "ac_frames"))
        require_same_geometry(self.dc_frames[0], self.ac_frames[0])
        if not (self.fx_ac > 0.0):
            raise InvalidConfigError(f"fx_ac must be positive, got {self.fx_ac}")
        if len(self.phases) != 3:
            raise InvalidConfigError("phases must hold 3 values")


@dataclass(frozen=True)
class HeightMap:
    """Surface height (mm) and local tilt angle (rad) from profilometry.

    flagged_rows marks rows where the per-row unwrap hit its aliasing
    limit (a step of essentially pi between neighbouring pixels); heights
    there are untrustworthy.
    """

    height: ScalarImage
    surface_angle: ScalarImage
    flagged_rows: np.ndarray

    def __post_init__(self):
        if self.height.kind is not ImageKind.HEIGHT:
            raise KindMismatchError("height image must have Height kind")
        if self.surface_angle.kind is not ImageKind.PHASE:
            raise KindMismatchError("surface_angle image must have Phase (radian) kind")
        require_same_geometry(self.height, self.surface_angle)
        rows = np.asarray(self.flagged_rows, dtype=bool)
        if rows.shape != (self.height.height,):
            raise DimensionMismatchError("flagged_rows length must equal image height")
        rows = rows.copy()
        rows.setflags(write=False)
        object.__setattr__(self, "flagged_rows", rows)


def demodulate_ac(i1: ScalarImage, i2: ScalarImage, i3: ScalarImage) -> ScalarImage:
    """Fringe amplitude of a 2 pi / 3 phase-stepped triplet.

    M = (sqrt(2)/3) * sqrt((I1-I2)^2 + (I2-I3)^2 + (I3-I1)^2)

    which returns exactly B for frames A + B cos(theta + phase_k),
    independent of A and of any common phase offset.
    """
    _check_triplet((i1, i2, i3), "demodulate_ac")
    a, b, c = i1.data, i2.data, i3.data
    m = (np.sqrt(2.0) / 3.0) * np.sqrt((a - b) ** 2 + (b - c) ** 2 + (c - a) ** 2)
    return ScalarImage(m, ImageKind.AMPLITUDE, i1.pixel_pitch)


def demodulate_dc(frames) -> ScalarImage:
    """Planar amplitude: the pixel-wise mean of the three DC frames."""
    frames = _check_triplet(frames, "demodulate_dc")
    mean = mean_of_images(list(frames))
    return ScalarImage(mean.data, ImageKind.AMPLITUDE, mean.pixel_pitch)


def calibrate_from_phantom(
    phantom_frames: FrameSet,
    lut: LookupTable,
    ref_mua: float = 0.0239,
    ref_musp: float = 0.957,
    wavelength_nm: float = 660.0,
) -> CalibrationSet:
    """Demodulate a phantom measurement and pair it with model predictions.

    The phantom's reflectance at DC and at the AC frequency is predicted
    by the lookup table's forward model; the table's AC frequency must
    match the frame set's.
    """
    if abs(phantom_frames.fx_ac - lut.fx_ac) > 1e-9:
        raise InvalidConfigError(
            f"frame fx_ac {phantom_frames.fx_ac} != table fx_ac {lut.fx_ac}"
        )
    rd_dc_pred, rd_ac_pred = lut_forward(lut, ref_mua, ref_musp)
    return CalibrationSet(
        m_dc_ref=demodulate_dc(phantom_frames.dc_frames),
        m_ac_ref=demodulate_ac(*phantom_frames.ac_frames),
        rd_dc_predicted=rd_dc_pred,
        rd_ac_predicted=rd_ac_pred,
        ref_mua=ref_mua,
        ref_musp=ref_musp,
        wavelength_nm=wavelength_nm,
    )


def _invert_rd_pair(
    rd_dc: ScalarImage,
    rd_ac: ScalarImage,
    lut: LookupTable,
    extra_invalid: np.ndarray | None = None,
    profile_corrected: bool = False,
) -> OpticalPropertyMap:
    mua, musp, valid = lut_invert_map(lut, rd_dc.data, rd_ac.data)
    if extra_invalid is not None:
        valid = valid & ~extra_invalid
    return OpticalPropertyMap(
        mua=ScalarImage(mua, ImageKind.ABSORPTION, rd_dc.pixel_pitch),
        musp=ScalarImage(musp, ImageKind.REDUCED_SCATTERING, rd_dc.pixel_pitch),
        valid=valid,
        profile_corrected=profile_corrected,
    )


def process_sfdi(
    frames: FrameSet, cal: CalibrationSet, lut: LookupTable
) -> OpticalPropertyMap:
    """Full six-image pipeline: demodulate, calibrate, invert.

    Strictly pixel-local; inversion failures mark pixels invalid rather
    than raising.
    """
    m_dc = demodulate_dc(frames.dc_frames)
    m_ac = demodulate_ac(*frames.ac_frames)
    require_same_geometry(m_dc, cal.m_dc_ref)
    rd_dc = compute_diffuse_reflectance(m_dc, cal.m_dc_ref, cal.rd_dc_predicted)
    rd_ac = compute_diffuse_reflectance(m_ac, cal.m_ac_ref, cal.rd_ac_predicted)
    return _invert_rd_pair(rd_dc, rd_ac, lut)


# -- fringe profilometry -------------------------------------------------------


def profilometry_phase(
    i1: ScalarImage, i2: ScalarImage, i3: ScalarImage, fx_prof: float
) -> tuple[ScalarImage, np.ndarray]:
    """Wrapped fringe phase of a phase-stepped triplet.

    For frames stepped by (0, 2pi/3, 4pi/3),

        phi = atan2(sqrt(3) (I3 - I2), 2 I1 - I2 - I3), in (-pi, pi],

    which recovers the carrier phase of frame 1 exactly.

    Returns (phase, degenerate) where degenerate marks pixels whose three
    intensities are equal (no fringe information); such pixels are filled
    by linear interpolation along their row when possible, left at zero
    on fully degenerate rows.  fx_prof is the projected frequency in
    cycles/mm; it scales nothing here but is validated for consistency
    with the calibration that will consume the phase.
    """
    if fx_prof <= 0.0:
        raise InvalidConfigError(f"fx_prof must be positive, got {fx_prof}")
    _check_triplet((i1, i2, i3), "profilometry_phase")
    a, b, c = i1.data, i2.data, i3.data
    num = np.sqrt(3.0) * (c - b)
    den = 2.0 * a - b - c
    scale = max(abs(a).max(), abs(b).max(), abs(c).max(), 1.0)
    degenerate = (np.abs(num) + np.abs(den)) < 1e-12 * scale
    phase = np.arctan2(num, den)

    if degenerate.any():
        cols = np.arange(phase.shape[1])
        for r in np.nonzero(degenerate.any(axis=1))[0]:
            bad = degenerate[r]
            if bad.all():
                phase[r] = 0.0
                continue
            phase[r, bad] = np.interp(cols[bad], cols[~bad], phase[r, ~bad])
    return ScalarImage(phase, ImageKind.PHASE, i1.pixel_pitch), degenerate


def unwrap_and_height(
    phase: ScalarImage, reference_phase: ScalarImage, k_height: float
) -> HeightMap:
    """Height from the phase shift against a flat-reference measurement.

    The difference (phase - reference) is wrapped to (-pi, pi] and then
    unwrapped independently along each row (jumps larger than pi are
    corrected by 2 pi steps); height = k_height * unwrapped difference.
    Each row's absolute offset is taken from its first pixel, so the true
    phase shift at the row start must lie within one wrap.

    The tilt angle is atan(|grad h|) from central differences at the
    image pixel pitch.
    """
    if k_height <= 0.0:
        raise InvalidConfigError(f"k_height must be positive, got {k_height}")
    if phase.kind is not ImageKind.PHASE or reference_phase.kind is not ImageKind.PHASE:
        raise KindMismatchError("unwrap_and_height needs two phase images")
    require_same_geometry(phase, reference_phase)

    delta = phase.data - reference_phase.data
    wrapped = np.mod(delta + np.pi, 2.0 * np.pi) - np.pi
    unwrapped = np.unwrap(wrapped, axis=1)
    # Aliasing limit: a genuine half-turn between neighbours cannot be
    # told apart from wrap; flag those rows instead of guessing.
    steps = np.abs(np.diff(unwrapped, axis=1))
    flagged = steps.max(axis=1, initial=0.0) > np.pi - 1e-9

    h = k_height * unwrapped
    gy, gx = np.gradient(h, phase.pixel_pitch)
    angle = np.arctan(np.hypot(gx, gy))
    return HeightMap(
        height=ScalarImage(h, ImageKind.HEIGHT, phase.pixel_pitch),
        surface_angle=ScalarImage(angle, ImageKind.PHASE, phase.pixel_pitch),
        flagged_rows=flagged,
    )


@dataclass(frozen=True)
class HeightCalibration:
    """Geometry calibration for profile-corrected processing.

    k_height_mm_per_rad   height per unit unwrapped phase shift
    fx_prof               projected profilometry frequency, cycles/mm
    reference_phase       wrapped phase measured on the flat reference
    heights / amplitude_scale
                          sampled multiplicative illumination falloff
                          versus height; linearly interpolated, clamped
                          at the end points
    """

    k_height_mm_per_rad: float
    fx_prof: float
    reference_phase: ScalarImage
    heights: np.ndarray
    amplitude_scale: np.ndarray

    def __post_init__(self):
        if self.k_height_mm_per_rad <= 0.0 or self.fx_prof <= 0.0:
            raise InvalidConfigError("k_height and fx_prof must be positive")
        if self.reference_phase.kind is not ImageKind.PHASE:
            raise KindMismatchError("reference_phase must be a phase image")
        h = np.asarray(self.heights, dtype=np.float64)
        s = np.asarray(self.amplitude_scale, dtype=np.float64)
        if h.ndim != 1 or h.size < 2 or h.shape != s.shape:
            raise InvalidConfigError("heights/amplitude_scale must be 1-D, length >= 2, equal")
        if not np.all(np.diff(h) > 0.0):
            raise NonMonotonicError("heights must be strictly ascending")
        if s.min() <= 0.0:
            raise InvalidConfigError("amplitude_scale must be positive")
        for name, arr in (("heights", h), ("amplitude_scale", s)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def scale_at(self, height: np.ndarray) -> np.ndarray:
        return np.interp(height, self.heights, self.amplitude_scale)


def process_sfdi_profile_corrected(
    frames: FrameSet,
    prof_frames,
    cal: CalibrationSet,
    lut: LookupTable,
    height_cal: HeightCalibration,
) -> OpticalPropertyMap:
    """Six-image pipeline with profilometry-based intensity correction.

    Measured amplitudes are divided by scale(h) * cos(tilt) before
    calibration, undoing illumination falloff with height and the
    foreshortening of tilted surface patches.  Raises AngleOverflowError
    if any pixel tilts past 75 degrees, where the correction diverges.
    """
    phase, _ = profilometry_phase(*prof_frames, fx_prof=height_cal.fx_prof)
    hm = unwrap_and_height(phase, height_cal.reference_phase, height_cal.k_height_mm_per_rad)

    angle = hm.surface_angle.data
    worst = float(angle.max())
    if worst >= MAX_SURFACE_ANGLE_RAD:
        raise AngleOverflowError(
            f"surface tilt {np.rad2deg(worst):.1f} deg exceeds "
            f"{np.rad2deg(MAX_SURFACE_ANGLE_RAD):.0f} deg limit"
        )
    correction = height_cal.scale_at(hm.height.data) * np.cos(angle)

    m_dc = demodulate_dc(frames.dc_frames)
    m_ac = demodulate_ac(*frames.ac_frames)
    require_same_geometry(m_dc, hm.height)
    m_dc = m_dc.with_data(m_dc.data / correction)
    m_ac = m_ac.with_data(m_ac.data / correction)

    rd_dc = compute_diffuse_reflectance(m_dc, cal.m_dc_ref, cal.rd_dc_predicted)
    rd_ac = compute_diffuse_reflectance(m_ac, cal.m_ac_ref, cal.rd_ac_predicted)
    extra_invalid = np.broadcast_to(hm.flagged_rows[:, None], rd_dc.shape)
    return _invert_rd_pair(rd_dc, rd_ac, lut, extra_invalid, profile_corrected=True)
