"""Measure pipeline behaviour before freezing test thresholds.

Exploratory script, not part of the package or test suite.
"""

import sys
import time

import numpy as np

sys.path.insert(0, "/root/pkg/src")

from sfdoptics import (
    CameraModel,
    ImageKind,
    RadialReflectance,
    ScalarImage,
    SceneKind,
    SsopFilterConfig,
    build_lut,
    calibrate_from_phantom,
    extract_ac,
    extract_dc,
    lut_forward,
    lut_invert,
    make_scene,
    nmae,
    process_sfdi,
    process_sfdi_profile_corrected,
    process_ssop,
    profilometry_phase,
    render_frame,
    render_frameset,
    render_profilometry,
    unwrap_and_height,
)
from sfdoptics.sfdi import HeightCalibration
from sfdoptics.synth import IlluminationSpec


def load_white():
    z = np.load("/root/pkg/tools/reference/white_2e6_seed777.npz")
    return RadialReflectance(
        bin_edges=z["bin_edges"],
        path_edges=z["path_edges"],
        weight=z["weight"],
        photon_count=2_000_000,
        mua=0.0,
        musp=1.0,
        anisotropy_g=0.9,
        n_medium=1.4,
        n_ambient=1.0,
        rng_seed=777,
    )


def height_cal_for(cam, lut, fx_prof=0.15):
    """Geometry calibration matching the renderer's height model."""
    flat = make_scene(SceneKind.HOMOGENEOUS, mua=0.0239, musp=0.957)
    ref_frames = render_profilometry(flat, lut, cam, fx_prof=fx_prof)
    ref_phase, _ = profilometry_phase(*ref_frames, fx_prof=fx_prof)
    heights = np.array([-50.0, 0.0, 50.0])
    scales = (cam.source_intensity + cam.height_falloff * heights) / cam.source_intensity
    return HeightCalibration(
        k_height_mm_per_rad=cam.k_height(fx_prof),
        fx_prof=fx_prof,
        reference_phase=ref_phase,
        heights=heights,
        amplitude_scale=scales,
    )


def main():
    white = load_white()
    lut = build_lut(None, white=white)
    clean = CameraModel()
    phantom = make_scene(SceneKind.HOMOGENEOUS, mua=0.0239, musp=0.957)
    cal = calibrate_from_phantom(render_frameset(phantom, lut, clean, seed=100), lut)

    print("-- two-region transition band --")
    scene = make_scene(
        SceneKind.TWO_REGION, mua_bg=0.02, musp_bg=0.8, mua_fg=0.1, musp_fg=1.5
    )
    op = process_sfdi(render_frameset(scene, lut, clean, seed=1), cal, lut)
    col = op.mua.data[130, :]
    off = (np.abs(col - 0.02) > 0.02 * 0.02) & (np.abs(col - 0.1) > 0.02 * 0.1)
    print(f"transition pixels: {off.sum()} -> {off.sum() * 0.278:.3f} mm")
    left = op.mua.data[16:-16, 16:150]
    right = op.mua.data[16:-16, 200:-16]
    print(f"region means: {left.mean():.6f} / {right.mean():.6f}")

    print("\n-- tilted plane, corrected pipeline (noiseless) --")
    tilt = make_scene(SceneKind.TILTED_PLANE, mua=0.05, musp=1.2, tilt_deg=10.0)
    hcal = height_cal_for(clean, lut)
    frames = render_frameset(tilt, lut, clean, seed=2)
    prof = render_profilometry(tilt, lut, clean)
    t0 = time.time()
    op_c = process_sfdi_profile_corrected(frames, prof, cal, lut, hcal)
    dt = time.time() - t0
    rel_mua = np.abs(op_c.mua.data / 0.05 - 1.0)
    rel_musp = np.abs(op_c.musp.data / 1.2 - 1.0)
    print(f"max per-pixel rel err: mua {rel_mua.max():.2e}  musp {rel_musp.max():.2e}  ({dt:.2f} s)")
    op_u = process_sfdi(frames, cal, lut)
    print(f"uncorrected mean rel err mua: {np.abs(op_u.mua.data/0.05-1).mean():.4f}")

    phase, _ = profilometry_phase(*prof, fx_prof=0.15)
    hm = unwrap_and_height(phase, hcal.reference_phase, hcal.k_height_mm_per_rad)
    tilt_rec = np.rad2deg(hm.surface_angle.data[10:-10, 10:-10])
    print(f"recovered tilt: {tilt_rec.mean():.4f} deg (true 10), max dev {np.abs(tilt_rec-10).max():.2e}")

    print("\n-- flat +5 mm with falloff -300/mm --")
    cam_fall = CameraModel(height_falloff=-300.0)
    flat5 = make_scene(SceneKind.TILTED_PLANE, mua=0.05, musp=1.2, tilt_deg=0.0, base_height_mm=5.0)
    hcal_f = height_cal_for(cam_fall, lut)
    cal_f = calibrate_from_phantom(render_frameset(phantom, lut, cam_fall, seed=100), lut)
    frames5 = render_frameset(flat5, lut, cam_fall, seed=3)
    prof5 = render_profilometry(flat5, lut, cam_fall)
    op5c = process_sfdi_profile_corrected(frames5, prof5, cal_f, lut, hcal_f)
    op5u = process_sfdi(frames5, cal_f, lut)
    ec = np.abs(op5c.mua.data / 0.05 - 1.0).mean()
    eu = np.abs(op5u.mua.data / 0.05 - 1.0).mean()
    print(f"corrected mean mua err {ec:.4f}   uncorrected {eu:.4f}")
    ecs = np.abs(op5c.musp.data / 1.2 - 1.0).mean()
    eus = np.abs(op5u.musp.data / 1.2 - 1.0).mean()
    print(f"corrected mean musp err {ecs:.4f}  uncorrected {eus:.4f}")

    print("\n-- profilometry wrapped-phase exactness --")
    flat = make_scene(SceneKind.HOMOGENEOUS, mua=0.05, musp=1.2)
    pf = render_profilometry(flat, lut, clean, fx_prof=0.15)
    ph, degen = profilometry_phase(*pf, fx_prof=0.15)
    x_mm = np.arange(flat.op.mua.width) * 0.278
    truth = np.mod(2 * np.pi * 0.15 * x_mm, 2 * np.pi)
    truth = np.mod(truth + np.pi, 2 * np.pi) - np.pi  # same wrap convention
    err = np.abs(ph.data - truth[np.newaxis, :])
    err = np.minimum(err, 2 * np.pi - err)
    near_wrap = np.abs(np.abs(truth) - np.pi) < 0.05
    print(f"max phase err away from wrap: {err[:, ~near_wrap].max():.2e}, degenerate {degen.sum()}")

    print("\n-- ssop filter examples (synthetic cosine) --")
    w, hgt, pitch = 340, 260, 0.25
    x = np.arange(w) * pitch
    a_lvl, b_lvl = 1.0, 0.3
    img = ScalarImage(
        np.tile(a_lvl + b_lvl * np.cos(2 * np.pi * 0.2 * x), (hgt, 1)),
        ImageKind.INTENSITY, pitch,
    )
    cfg_f = SsopFilterConfig()
    dc = extract_dc(img, cfg_f)
    interior = (slice(16, -16), slice(16, -16))
    ripple = np.abs(dc.data[interior] - a_lvl).max() / b_lvl
    print(f"extract_dc ripple: {ripple:.4f} of B")
    ac = extract_ac(img, cfg_f)
    env_err = np.abs(ac.data[interior] - b_lvl).max() / b_lvl
    print(f"extract_ac envelope err: {env_err:.4f} of B")

    b_slow = b_lvl * (1.0 + 0.3 * np.sin(2 * np.pi * x / x[-1]))
    img_am = ScalarImage(
        np.tile(b_slow * np.cos(2 * np.pi * 0.2 * x), (hgt, 1)), ImageKind.INTENSITY, pitch
    )
    env = extract_ac(img_am, cfg_f)
    track = np.abs(env.data[interior] / np.tile(b_slow, (hgt, 1))[interior] - 1.0).max()
    print(f"AM tracking err: {track:.4f}")

    flatimg = ScalarImage(np.full((hgt, w), 2.5), ImageKind.INTENSITY, pitch)
    print(f"fringe-free no-op: {np.abs(extract_dc(flatimg, cfg_f).data - 2.5).max():.2e}")
    img0 = ScalarImage(
        np.tile(b_lvl * np.cos(2 * np.pi * 0.2 * x), (hgt, 1)) + 10.0, ImageKind.INTENSITY, pitch
    )
    dc0 = extract_dc(img0, cfg_f)
    print(f"pure cosine + offset, dc interior dev: {np.abs(dc0.data[interior]-10).max()/b_lvl:.4f} of B")

    print("\n-- ssop phantom (0.0239, 0.957) interior means --")
    fs = render_frameset(phantom, lut, clean, seed=4)
    snap = fs.ac_frames[0]
    t0 = time.time()
    op_s = process_ssop(snap, cal, lut)
    sel = np.zeros(op_s.mua.shape, bool)
    sel[16:-16, 16:-16] = True
    sel &= op_s.valid
    m_mua = op_s.mua.data[sel].mean()
    m_musp = op_s.musp.data[sel].mean()
    print(
        f"mean mua {m_mua:.5f} (err {abs(m_mua/0.0239-1):.4f})  "
        f"mean musp {m_musp:.4f} (err {abs(m_musp/0.957-1):.4f})  ({time.time()-t0:.2f} s)"
    )

    print("\n-- ssop 18-phantom grid --")
    worst = [0.0, 0.0]
    for mua_t in np.linspace(0.02, 0.15, 6):
        for musp_t in (0.3, 0.9, 1.5):
            sc = make_scene(SceneKind.HOMOGENEOUS, mua=mua_t, musp=musp_t)
            fs_i = render_frameset(sc, lut, clean, seed=5)
            op_i = process_ssop(fs_i.ac_frames[0], cal, lut)
            s = np.zeros(op_i.mua.shape, bool)
            s[16:-16, 16:-16] = True
            s &= op_i.valid
            e0 = abs(op_i.mua.data[s].mean() / mua_t - 1)
            e1 = abs(op_i.musp.data[s].mean() / musp_t - 1)
            worst[0] = max(worst[0], e0)
            worst[1] = max(worst[1], e1)
            if e0 > 0.12 or e1 > 0.06:
                print(f"  VIOLATION at ({mua_t:.3f}, {musp_t:.1f}): {e0:.4f}/{e1:.4f}")
    print(f"worst interior-mean errors over grid: mua {worst[0]:.4f}  musp {worst[1]:.4f}")

    print("\n-- renderer hand arithmetic, fx=0 --")
    rd_dc, rd_ac = lut_forward(lut, 0.05, 1.2)
    fr = render_frame(flat, IlluminationSpec(0.0, 0.0, 1.0), lut, clean)
    expect = 0.5 * clean.source_intensity * rd_dc * 2.0
    print(f"frame const? {np.ptp(fr.data):.2e}; value {fr.data[0,0]:.6f} vs {expect:.6f}")

    print("\n-- lut round trip: 1000 random interior points --")
    rng = np.random.default_rng(99)
    lm = np.log(lut.mua_grid)
    ls = np.log(lut.musp_grid)
    mua_q = np.exp(rng.uniform(lm[1], lm[-2], 1000))
    musp_q = np.exp(rng.uniform(ls[1], ls[-2], 1000))
    worst_rt = 0.0
    for a, s in zip(mua_q, musp_q):
        r0, r1 = lut_forward(lut, a, s)
        ai, si, ok = lut_invert(lut, r0, r1)
        worst_rt = max(worst_rt, abs(ai / a - 1), abs(si / s - 1))
        if not ok:
            print(f"  invalid inversion at ({a:.4f}, {s:.4f})")
    print(f"worst round-trip rel err: {worst_rt:.2e}")

    print("\n-- shot-noise variance vs mean --")
    cam_n = CameraModel(shot_noise=True)
    frn = render_frame(flat, IlluminationSpec(0.0, 0.0, 1.0), lut, cam_n, seed=8)
    region = frn.data[50:150, 50:150]
    print(f"var/mean = {region.var()/region.mean():.4f} (expect ~1)")


if __name__ == "__main__":
    main()
