"""Single-snapshot pipeline: Fourier band filters, envelope, recovery."""

import numpy as np
import pytest

from sfdoptics import (
    ComplexSpectrum,
    ImageKind,
    ScalarImage,
    SceneKind,
    SsopFilterConfig,
    extract_ac,
    extract_dc,
    fft2_forward,
    fft2_inverse,
    make_scene,
    process_ssop,
    render_frameset,
)
from sfdoptics.errors import InvalidConfigError, KindMismatchError

# 340 columns at 0.25 mm pitch give an 85 mm window, so the 0.2 / mm
# fringe completes exactly 17 cycles and lands on a single DFT bin;
# filter behaviour is then exact instead of leakage-limited
W, H, PITCH = 340, 260, 0.25
X_MM = np.arange(W) * PITCH
FX = 0.2
INTERIOR = (slice(16, -16), slice(16, -16))


def intensity(rows):
    return ScalarImage(np.tile(rows, (H, 1)), ImageKind.INTENSITY, PITCH)


class TestFilterConfig:
    def test_defaults_bracket_the_fringe(self):
        cfg = SsopFilterConfig()
        assert cfg.f_dc_stop_low < FX < cfg.f_dc_stop_high
        assert cfg.f_ac_pass_low == cfg.f_dc_stop_low

    def test_inverted_stop_band_rejected(self):
        with pytest.raises(InvalidConfigError):
            SsopFilterConfig(f_dc_stop_low=0.3, f_dc_stop_high=0.2)

    def test_nonpositive_edge_rejected(self):
        with pytest.raises(InvalidConfigError):
            SsopFilterConfig(f_ac_pass_low=0.0)


class TestFourier:
    def test_round_trip_identity(self):
        rng = np.random.default_rng(9)
        img = intensity(rng.uniform(1.0, 5.0, W))
        back = fft2_inverse(fft2_forward(img))
        np.testing.assert_allclose(back.data, img.data, atol=1e-12)

    def test_axes_match_physical_frequencies(self):
        img = intensity(np.cos(2 * np.pi * FX * X_MM))
        spec = fft2_forward(img)
        assert spec.values.shape == (H, W)
        peak_col = np.argmax(np.abs(spec.values[0, : W // 2]))
        assert spec.fx[peak_col] == pytest.approx(FX, abs=1e-12)


class TestExtractDc:
    def test_removes_fringe_exactly(self):
        img = intensity(1.0 + 0.3 * np.cos(2 * np.pi * FX * X_MM))
        dc = extract_dc(img, SsopFilterConfig())
        ripple = np.abs(dc.data[INTERIOR] - 1.0).max() / 0.3
        assert ripple <= 1e-9

    def test_preserves_slow_structure(self):
        # 4 cycles over the window is about 0.047 / mm, far below the stop band
        slow = 1.0 + 0.2 * np.cos(2 * np.pi * 4.0 * X_MM / (W * PITCH))
        img = intensity(slow + 0.3 * np.cos(2 * np.pi * FX * X_MM))
        dc = extract_dc(img, SsopFilterConfig())
        assert np.abs(dc.data[INTERIOR] - np.tile(slow, (H, 1))[INTERIOR]).max() <= 1e-9

    def test_rejects_non_intensity(self):
        img = ScalarImage(np.ones((H, W)), ImageKind.AMPLITUDE, PITCH)
        with pytest.raises(KindMismatchError):
            extract_dc(img, SsopFilterConfig())


class TestExtractAc:
    def test_constant_envelope(self):
        img = intensity(1.0 + 0.3 * np.cos(2 * np.pi * FX * X_MM))
        ac = extract_ac(img, SsopFilterConfig())
        assert ac.kind is ImageKind.AMPLITUDE
        err = np.abs(ac.data[INTERIOR] - 0.3).max() / 0.3
        assert err <= 1e-9

    def test_slowly_varying_envelope(self):
        # one-cycle amplitude modulation keeps both sidebands inside the
        # pass band, so the envelope is recovered exactly
        b = 0.3 * (1.0 + 0.3 * np.cos(2 * np.pi * X_MM / (W * PITCH)))
        img = intensity(1.0 + b * np.cos(2 * np.pi * FX * X_MM))
        ac = extract_ac(img, SsopFilterConfig())
        err = np.abs(ac.data[INTERIOR] - np.tile(b, (H, 1))[INTERIOR]).max() / 0.3
        assert err <= 0.02

    def test_dc_leakage_absent(self):
        img = intensity(np.full(W, 2.0) + 0.3 * np.cos(2 * np.pi * FX * X_MM))
        ac = extract_ac(img, SsopFilterConfig())
        # the flat background must not contaminate the fringe amplitude
        assert np.abs(ac.data[INTERIOR] - 0.3).max() / 0.3 <= 1e-9


class TestProcessSsop:
    def test_homogeneous_interior_means(self, default_lut, clean_cam, calibration):
        scene = make_scene(SceneKind.HOMOGENEOUS, mua=0.0239, musp=0.957)
        frames = render_frameset(scene, default_lut, clean_cam, seed=4)
        op = process_ssop(frames.ac_frames[0], calibration, default_lut)
        sel = np.zeros(op.mua.shape, dtype=bool)
        sel[INTERIOR] = True
        sel &= op.valid
        mean_mua = op.mua.data[sel].mean()
        mean_musp = op.musp.data[sel].mean()
        assert abs(mean_mua / 0.0239 - 1.0) <= 0.03
        assert abs(mean_musp / 0.957 - 1.0) <= 0.03

    def test_border_marked_invalid(self, default_lut, clean_cam, calibration):
        scene = make_scene(SceneKind.HOMOGENEOUS, mua=0.05, musp=1.2)
        frames = render_frameset(scene, default_lut, clean_cam, seed=4)
        op = process_ssop(frames.ac_frames[0], calibration, default_lut, border_px=16)
        assert not op.valid[:16, :].any()
        assert not op.valid[:, -16:].any()
        assert op.valid[16:-16, 16:-16].any()

    def test_snapshot_kind_checked(self, default_lut, calibration):
        bad = ScalarImage(np.ones((H, W)), ImageKind.AMPLITUDE, PITCH)
        with pytest.raises(KindMismatchError):
            process_ssop(bad, calibration, default_lut)
