"""Six-frame pipeline: calibration, recovery, profilometry, height correction."""

import numpy as np
import pytest

from sfdoptics import (
    CameraModel,
    HeightCalibration,
    ImageKind,
    ScalarImage,
    SceneKind,
    calibrate_from_phantom,
    lut_forward,
    make_scene,
    nmae,
    process_sfdi,
    process_sfdi_profile_corrected,
    profilometry_phase,
    render_frameset,
    render_profilometry,
    unwrap_and_height,
)
from sfdoptics.errors import AngleOverflowError, InvalidConfigError, NonMonotonicError

from conftest import REF_MUA, REF_MUSP, build_height_calibration


def rel_err(pred, truth):
    return np.abs(pred - truth) / truth


class TestCalibration:
    def test_predictions_match_forward_model(self, calibration, default_lut):
        rd_dc, rd_ac = lut_forward(default_lut, REF_MUA, REF_MUSP)
        assert calibration.rd_dc_predicted == pytest.approx(rd_dc, rel=1e-12)
        assert calibration.rd_ac_predicted == pytest.approx(rd_ac, rel=1e-12)
        assert calibration.ref_mua == REF_MUA
        assert calibration.ref_musp == REF_MUSP

    def test_reference_amplitudes_are_demodulated_frames(self, calibration, phantom_frames):
        # noise-free homogeneous phantom: both amplitude maps are uniform
        assert calibration.m_dc_ref.kind is ImageKind.AMPLITUDE
        assert calibration.m_ac_ref.kind is ImageKind.AMPLITUDE
        assert calibration.m_dc_ref.data.std() / calibration.m_dc_ref.data.mean() < 1e-12
        assert calibration.m_ac_ref.data.mean() < calibration.m_dc_ref.data.mean()

    def test_frequency_mismatch_rejected(self, white, phantom_frames):
        from sfdoptics import build_lut

        other = build_lut(None, fx_ac=0.15, white=white)
        with pytest.raises(InvalidConfigError):
            calibrate_from_phantom(phantom_frames, other)


class TestClosedLoopNoiseless:
    def test_homogeneous_recovery_per_pixel(self, default_lut, clean_cam, calibration):
        scene = make_scene(SceneKind.HOMOGENEOUS, mua=0.05, musp=1.2, seed=1)
        frames = render_frameset(scene, default_lut, clean_cam, seed=1)
        op = process_sfdi(frames, calibration, default_lut)
        assert op.valid.all()
        assert rel_err(op.mua.data, scene.op.mua.data).max() <= 0.01
        assert rel_err(op.musp.data, scene.op.musp.data).max() <= 0.01

    def test_two_region_transition_band(self, default_lut, clean_cam, calibration):
        scene = make_scene(
            SceneKind.TWO_REGION,
            mua_bg=0.03, musp_bg=1.0, mua_fg=0.09, musp_fg=1.6, split_frac=0.5,
            seed=2,
        )
        frames = render_frameset(scene, default_lut, clean_cam, seed=2)
        op = process_sfdi(frames, calibration, default_lut)
        err = rel_err(op.mua.data, scene.op.mua.data)
        # pixels further than 3 mm from the edge must be exact to 1%
        cols_mm = (np.arange(scene.op.mua.width) - scene.op.mua.width * 0.5)
        cols_mm = np.abs(cols_mm) * scene.op.mua.pixel_pitch
        away = np.tile(cols_mm > 3.0, (scene.op.mua.height, 1))
        assert err[away].max() <= 0.01

    def test_gradient_recovery(self, default_lut, clean_cam, calibration):
        scene = make_scene(
            SceneKind.LINEAR_GRADIENT,
            mua_lo=0.02, mua_hi=0.1, musp_lo=0.6, musp_hi=1.8,
            seed=3,
        )
        frames = render_frameset(scene, default_lut, clean_cam, seed=3)
        op = process_sfdi(frames, calibration, default_lut)
        assert rel_err(op.mua.data, scene.op.mua.data).max() <= 0.01
        assert rel_err(op.musp.data, scene.op.musp.data).max() <= 0.01


class TestClosedLoopNoisy:
    def test_interior_nmae_under_shot_noise(self, default_lut, noisy_cam, calibration):
        scene = make_scene(SceneKind.HOMOGENEOUS, mua=0.05, musp=1.2, seed=4)
        frames = render_frameset(scene, default_lut, noisy_cam, seed=4)
        op = process_sfdi(frames, calibration, default_lut)
        b = 16
        sel = np.zeros(op.mua.shape, dtype=bool)
        sel[b:-b, b:-b] = True
        sel &= op.valid
        assert nmae(op.mua, scene.op.mua, mask=sel) <= 0.02
        assert nmae(op.musp, scene.op.musp, mask=sel) <= 0.02


class TestProfilometry:
    def test_phase_recovered_exactly_on_flat_plane(self, default_lut, clean_cam):
        fx_prof = 0.15
        scene = make_scene(SceneKind.TILTED_PLANE, mua=REF_MUA, musp=REF_MUSP, tilt_deg=0.0)
        p1, p2, p3 = render_profilometry(scene, default_lut, clean_cam, fx_prof=fx_prof)
        phase, flagged = profilometry_phase(p1, p2, p3, fx_prof)
        x_mm = np.arange(phase.width) * phase.pixel_pitch
        expected = np.angle(np.exp(1j * 2.0 * np.pi * fx_prof * x_mm))
        err = np.abs(np.angle(np.exp(1j * (phase.data - expected))))
        assert err.max() <= 1e-6

    def test_unwrap_and_height_linear_ramp(self):
        k = 1.0 / (2.0 * np.pi * 0.15 * 0.5)
        h, w = 10, 200
        x = np.arange(w) * 0.278
        true_height = 0.08 * x
        dphi = true_height / k
        ref = ScalarImage(np.zeros((h, w)), ImageKind.PHASE, 0.278)
        wrapped = np.angle(np.exp(1j * np.tile(dphi, (h, 1))))
        phase = ScalarImage(wrapped, ImageKind.PHASE, 0.278)
        hm = unwrap_and_height(phase, ref, k)
        assert not hm.flagged_rows.any()
        np.testing.assert_allclose(hm.height.data, np.tile(true_height, (h, 1)), atol=1e-9)
        expected_angle = np.degrees(np.arctan(0.08))
        assert np.degrees(hm.surface_angle.data[5, 100]) == pytest.approx(
            expected_angle, abs=0.2
        )

    def test_surface_angle_matches_tilt(self, default_lut, clean_cam, height_cal):
        scene = make_scene(
            SceneKind.TILTED_PLANE, mua=0.05, musp=1.2, tilt_deg=10.0, seed=5
        )
        prof = render_profilometry(scene, default_lut, clean_cam, fx_prof=0.15, seed=5)
        phase, _ = profilometry_phase(*prof, 0.15)
        hm = unwrap_and_height(phase, height_cal.reference_phase,
                               height_cal.k_height_mm_per_rad)
        mid = np.degrees(hm.surface_angle.data[:, 20:-20])
        assert np.abs(mid - 10.0).max() <= 0.1


class TestHeightCalibration:
    def test_scale_interpolation(self, height_cal):
        lo, mid, hi = height_cal.amplitude_scale
        assert height_cal.scale_at(0.0) == pytest.approx(mid)
        assert height_cal.scale_at(25.0) == pytest.approx(0.5 * (mid + hi))

    def test_unsorted_heights_rejected(self, height_cal):
        with pytest.raises(NonMonotonicError):
            HeightCalibration(
                k_height_mm_per_rad=height_cal.k_height_mm_per_rad,
                fx_prof=0.15,
                reference_phase=height_cal.reference_phase,
                heights=(50.0, 0.0, -50.0),
                amplitude_scale=(1.0, 1.0, 1.0),
            )


class TestProfileCorrection:
    def test_tilted_plane_corrected_recovery(self, default_lut, clean_cam,
                                             calibration, height_cal):
        scene = make_scene(
            SceneKind.TILTED_PLANE, mua=0.05, musp=1.2, tilt_deg=10.0, seed=6
        )
        frames = render_frameset(scene, default_lut, clean_cam, seed=6)
        prof = render_profilometry(scene, default_lut, clean_cam, fx_prof=0.15, seed=6)
        op = process_sfdi_profile_corrected(
            frames, prof, calibration, default_lut, height_cal
        )
        assert op.profile_corrected
        sel = op.valid
        assert sel.any()
        assert rel_err(op.mua.data, scene.op.mua.data)[sel].max() <= 0.01
        assert rel_err(op.musp.data, scene.op.musp.data)[sel].max() <= 0.01

    def test_uncorrected_tilt_is_biased(self, default_lut, clean_cam, calibration):
        scene = make_scene(
            SceneKind.TILTED_PLANE, mua=0.05, musp=1.2, tilt_deg=10.0, seed=6
        )
        frames = render_frameset(scene, default_lut, clean_cam, seed=6)
        op = process_sfdi(frames, calibration, default_lut)
        assert nmae(op.mua, scene.op.mua) > 0.02

    def test_height_falloff_corrected_vs_not(self, default_lut, calibration):
        cam = CameraModel(height_falloff=-300.0)
        hc = build_height_calibration(default_lut, cam)
        scene = make_scene(
            SceneKind.TILTED_PLANE, mua=0.05, musp=1.2, tilt_deg=0.0,
            base_height_mm=5.0, seed=7,
        )
        frames = render_frameset(scene, default_lut, cam, seed=7)
        prof = render_profilometry(scene, default_lut, cam, fx_prof=0.15, seed=7)
        corrected = process_sfdi_profile_corrected(
            frames, prof, calibration, default_lut, hc
        )
        plain = process_sfdi(frames, calibration, default_lut)
        sel = corrected.valid
        assert rel_err(corrected.mua.data, scene.op.mua.data)[sel].max() <= 0.005
        assert nmae(plain.mua, scene.op.mua) > 0.02

    def test_steep_surface_rejected(self, default_lut, clean_cam, calibration, height_cal):
        scene = make_scene(
            SceneKind.TILTED_PLANE, mua=0.05, musp=1.2, tilt_deg=80.0, seed=8
        )
        frames = render_frameset(scene, default_lut, clean_cam, seed=8)
        prof = render_profilometry(scene, default_lut, clean_cam, fx_prof=0.15, seed=8)
        with pytest.raises(AngleOverflowError):
            process_sfdi_profile_corrected(
                frames, prof, calibration, default_lut, height_cal
            )
