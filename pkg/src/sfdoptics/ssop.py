"""Single-snapshot optical property recovery.

One fringe-modulated frame replaces the six-image measurement: the DC and
AC amplitudes are separated in the 2-D Fourier domain instead of by phase
stepping.  The modulation runs along x, so filters act on columns of the
spectrum:

* DC amplitude: notch out the fringe band |fx| in [f_dc_stop) .. ] and
  inverse transform; what survives is the unmodulated baseline.
* AC amplitude: discard |fx| <= f_ac_pass_low (baseline and low-frequency
  scene content), inverse transform, then take the per-row Hilbert
  envelope of the remaining fringe signal.

The price of one-shot capture is spectral cross-talk: scene detail that
shares the fringe band cannot be told apart from fringes, so recovered
maps blur near sharp structure and within a border of roughly one fringe
period.  Processing marks a fixed border invalid; interior artefacts are
left to the caller's quality metrics.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.fft
from scipy.signal import hilbert

from .errors import InvalidConfigError, KindMismatchError
from .images import (
    CalibrationSet,
    ImageKind,
    OpticalPropertyMap,
    ScalarImage,
    compute_diffuse_reflectance,
    require_same_geometry,
)
from .lut import LookupTable
from .sfdi import _invert_rd_pair

log = logging.getLogger(__name__)

SSOP_BORDER_PX = 16


class WindowShape(Enum):
    RECTANGULAR = "rectangular"


class ModulationAxis(Enum):
    X = "x"


@dataclass(frozen=True)
class SsopFilterConfig:
    """Band edges (cycles/mm) for snapshot demultiplexing.

    Defaults assume the 0.2 cycles/mm fringe: the notch spans
    [0.16, 0.24] and the AC path keeps everything above 0.16.
    """

    f_dc_stop_low: float = 0.16
    f_dc_stop_high: float = 0.24
    f_ac_pass_low: float = 0.16
    window_shape: WindowShape = WindowShape.RECTANGULAR
    modulation_axis: ModulationAxis = ModulationAxis.X

    def __post_init__(self):
        if not (0.0 < self.f_dc_stop_low < self.f_dc_stop_high):
            raise InvalidConfigError(
                f"need 0 < f_dc_stop_low < f_dc_stop_high, got "
                f"[{self.f_dc_stop_low}, {self.f_dc_stop_high}]"
            )
        if self.f_ac_pass_low <= 0.0:
            raise InvalidConfigError("f_ac_pass_low must be positive")
        if self.window_shape is not WindowShape.RECTANGULAR:
            raise InvalidConfigError("only the rectangular window is implemented")
        if self.modulation_axis is not ModulationAxis.X:
            raise InvalidConfigError("only x-axis modulation is implemented")


@dataclass(frozen=True)
class ComplexSpectrum:
    """Unshifted 2-D DFT of a scalar image, with physical frequency axes.

    fx (cycles/mm) indexes columns, fy rows, both in numpy fftfreq order.
    source_kind remembers what the spatial image meant so the inverse
    transform can rebuild a typed image.
    """

    values: np.ndarray
    fx: np.ndarray
    fy: np.ndarray
    pixel_pitch: float
    source_kind: ImageKind

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.ndim != 2:
            raise InvalidConfigError("spectrum must be 2-D")
        if self.fx.shape != (vals.shape[1],) or self.fy.shape != (vals.shape[0],):
            raise InvalidConfigError("frequency axes inconsistent with spectrum shape")
        object.__setattr__(self, "values", vals)


def fft2_forward(img: ScalarImage) -> ComplexSpectrum:
    """Plain (unpadded, unwindowed) 2-D DFT with frequency axes in cycles/mm."""
    return ComplexSpectrum(
        values=scipy.fft.fft2(img.data),
        fx=scipy.fft.fftfreq(img.width, d=img.pixel_pitch),
        fy=scipy.fft.fftfreq(img.height, d=img.pixel_pitch),
        pixel_pitch=img.pixel_pitch,
        source_kind=img.kind,
    )


def fft2_inverse(spec: ComplexSpectrum) -> ScalarImage:
    """Inverse DFT back to a typed image (real part).

    Filtering can leave faint negative ripple in quantities that are
    non-negative by definition; such pixels are clamped to zero and
    counted in the debug log.
    """
    data = scipy.fft.ifft2(spec.values).real
    if spec.source_kind in (
        ImageKind.INTENSITY,
        ImageKind.AMPLITUDE,
        ImageKind.REFLECTANCE,
        ImageKind.ABSORPTION,
        ImageKind.REDUCED_SCATTERING,
    ):
        negative = data < 0.0
        if negative.any():
            log.debug(
                "fft2_inverse clamped %d negative pixels (min %.3g)",
                int(negative.sum()),
                float(data.min()),
            )
            data = np.where(negative, 0.0, data)
    return ScalarImage(data, spec.source_kind, spec.pixel_pitch)


def extract_dc(img: ScalarImage, cfg: SsopFilterConfig) -> ScalarImage:
    """Baseline amplitude: zero the fringe band |fx| in the stop range.

    A fringe-free image passes through unchanged (up to FFT round-off)
    as long as its content stays out of the stop band.
    """
    if img.kind is not ImageKind.INTENSITY:
        raise KindMismatchError("extract_dc expects an intensity frame")
    spec = fft2_forward(img)
    afx = np.abs(spec.fx)
    stop = (afx >= cfg.f_dc_stop_low) & (afx <= cfg.f_dc_stop_high)
    values = spec.values.copy()
    values[:, stop] = 0.0
    filtered = ComplexSpectrum(values, spec.fx, spec.fy, spec.pixel_pitch, ImageKind.AMPLITUDE)
    return fft2_inverse(filtered)


def extract_ac(img: ScalarImage, cfg: SsopFilterConfig) -> ScalarImage:
    """Fringe amplitude: high-pass above f_ac_pass_low, then the
    per-row Hilbert envelope of the surviving signal."""
    if img.kind is not ImageKind.INTENSITY:
        raise KindMismatchError("extract_ac expects an intensity frame")
    spec = fft2_forward(img)
    keep = np.abs(spec.fx) > cfg.f_ac_pass_low
    values = spec.values * keep[np.newaxis, :]
    fringe = scipy.fft.ifft2(values).real
    envelope = np.abs(hilbert(fringe, axis=1))
    return ScalarImage(envelope, ImageKind.AMPLITUDE, img.pixel_pitch)


def process_ssop(
    img: ScalarImage,
    cal: CalibrationSet,
    lut: LookupTable,
    cfg: SsopFilterConfig | None = None,
    border_px: int = SSOP_BORDER_PX,
) -> OpticalPropertyMap:
    """Recover optical properties from a single fringe-modulated frame.

    Uses the same calibration set and lookup table as the six-image
    pipeline; the filter-transition border (border_px on every side) is
    marked invalid.
    """
    if cfg is None:
        cfg = SsopFilterConfig()
    if border_px < 0:
        raise InvalidConfigError("border_px must be >= 0")
    m_dc = extract_dc(img, cfg)
    m_ac = extract_ac(img, cfg)
    require_same_geometry(m_dc, cal.m_dc_ref)
    rd_dc = compute_diffuse_reflectance(m_dc, cal.m_dc_ref, cal.rd_dc_predicted)
    rd_ac = compute_diffuse_reflectance(m_ac, cal.m_ac_ref, cal.rd_ac_predicted)

    border = np.zeros(img.shape, dtype=bool)
    if border_px > 0:
        border[:border_px, :] = True
        border[-border_px:, :] = True
        border[:, :border_px] = True
        border[:, -border_px:] = True
    return _invert_rd_pair(rd_dc, rd_ac, lut, extra_invalid=border)
