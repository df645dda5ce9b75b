"""Shared fixtures for the test suite.

The expensive ingredient is the white Monte Carlo run that everything
downstream (LUT, renderer, recovery) is built on.  One 2e6-photon run is
simulated once per session and shared; set the SFDOPTICS_TEST_WHITE
environment variable to an .npz path to cache it across sessions during
development.  The cached file also stores the wall time of the original
simulation so runtime budgets stay honest when the cache is used.
"""

import os
import time

import numpy as np
import pytest

from sfdoptics import (
    CameraModel,
    HeightCalibration,
    RadialReflectance,
    SceneKind,
    TransportConfig,
    build_lut,
    calibrate_from_phantom,
    make_scene,
    profilometry_phase,
    render_frameset,
    render_profilometry,
    simulate_white_mc,
)

WHITE_PHOTONS = 2_000_000
WHITE_SEED = 777
CACHE_ENV = "SFDOPTICS_TEST_WHITE"

REF_MUA = 0.0239
REF_MUSP = 0.957


@pytest.fixture(scope="session", autouse=True)
def warm_kernel():
    """Compile the transport kernel once so timed tests measure physics.

    The kernel is cached on disk by numba, so this is cheap after the
    first session on a given machine.
    """
    simulate_white_mc(TransportConfig(photon_count=1000, rng_seed=1), threads=1)


@pytest.fixture(scope="session")
def white_session(warm_kernel):
    """(white run, elapsed seconds) shared by the whole session."""
    cfg = TransportConfig(photon_count=WHITE_PHOTONS, rng_seed=WHITE_SEED)
    cache = os.environ.get(CACHE_ENV)
    if cache and os.path.exists(cache):
        z = np.load(cache)
        white = RadialReflectance(
            bin_edges=z["bin_edges"],
            path_edges=z["path_edges"],
            weight=z["weight"],
            photon_count=WHITE_PHOTONS,
            mua=0.0,
            musp=1.0,
            anisotropy_g=cfg.anisotropy_g,
            n_medium=cfg.n_medium,
            n_ambient=cfg.n_ambient,
            rng_seed=WHITE_SEED,
        )
        return white, float(z["elapsed_seconds"])
    t0 = time.perf_counter()
    white = simulate_white_mc(cfg, threads=4)
    elapsed = time.perf_counter() - t0
    if cache:
        np.savez(
            cache,
            bin_edges=white.bin_edges,
            path_edges=white.path_edges,
            weight=white.weight,
            elapsed_seconds=np.float64(elapsed),
        )
    return white, elapsed


@pytest.fixture(scope="session")
def white(white_session):
    return white_session[0]


@pytest.fixture(scope="session")
def white_elapsed(white_session):
    return white_session[1]


@pytest.fixture(scope="session")
def default_lut(white):
    """Default 128x128 table at fx_ac = 0.2, built from the shared run."""
    return build_lut(None, white=white)


@pytest.fixture(scope="session")
def clean_cam():
    """Noise-free continuous camera (the constructor defaults)."""
    return CameraModel()


@pytest.fixture(scope="session")
def noisy_cam():
    """Default source strength with shot noise and 16-bit quantisation."""
    return CameraModel(shot_noise=True, quantization_bits=16)


@pytest.fixture(scope="session")
def phantom_frames(default_lut, clean_cam):
    """Noise-free six-frame stack of the reference calibration phantom."""
    scene = make_scene(SceneKind.HOMOGENEOUS, mua=REF_MUA, musp=REF_MUSP)
    return render_frameset(scene, default_lut, clean_cam, seed=100)


@pytest.fixture(scope="session")
def calibration(phantom_frames, default_lut):
    return calibrate_from_phantom(phantom_frames, default_lut)


def build_height_calibration(lut, cam, fx_prof=0.15, heights=(-50.0, 0.0, 50.0)):
    """Height calibration from a flat reference target, as a bench would do.

    Renders the profilometry pattern on a flat plane at height zero for
    the reference phase, and records how the source intensity scales at
    the calibration heights under the camera's height falloff.
    """
    flat = make_scene(SceneKind.TILTED_PLANE, mua=REF_MUA, musp=REF_MUSP, tilt_deg=0.0)
    p1, p2, p3 = render_profilometry(flat, lut, cam, fx_prof=fx_prof, seed=200)
    phase, _ = profilometry_phase(p1, p2, p3, fx_prof)
    s0 = cam.source_intensity
    scale = tuple((s0 + cam.height_falloff * h) / s0 for h in heights)
    k_height = 1.0 / (2.0 * np.pi * fx_prof * cam.fringe_shift_per_height)
    return HeightCalibration(
        k_height_mm_per_rad=k_height,
        fx_prof=fx_prof,
        reference_phase=phase,
        heights=tuple(heights),
        amplitude_scale=scale,
    )


@pytest.fixture(scope="session")
def height_cal(default_lut, clean_cam):
    return build_height_calibration(default_lut, clean_cam)
