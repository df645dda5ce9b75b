"""Synthetic fringe-frame rendering with exact ground truth.

Scenes carry a ground-truth optical-property map (and optionally a height
map); the renderer turns them into the intensity frames a structured-
illumination camera would record, via the same lookup table the recovery
pipelines invert.  That closes the loop: processing a rendered
measurement should return the scene's ground truth up to noise and
filter artefacts.

Image formation per pixel:

    I = S(h) * cos(tilt) / 2 * [rd_dc + m * rd(fx) * cos(2 pi fx x + phase + dphi)]

where S(h) = source_intensity + height_falloff * h, tilt foreshortens the
apparent brightness, and dphi = 2 pi fx * fringe_shift_per_height * h is
the lateral fringe displacement a projector-camera triangulation sees on
elevated surfaces (this is what profilometry measures; it scales with the
projected frequency, so DC frames are unaffected).  rd(fx) comes from the
table at its two native frequencies and is interpolated linearly in fx in
between; only profilometry frames (whose amplitude never enters height
recovery) use the interpolated values.

Noise is applied in camera order: Poisson shot noise on the expected
counts, additive Gaussian read noise, clip at zero, then optional
quantisation to the sensor bit depth.  All noise derives from
numpy's seeded Generator keyed by (seed, frame_index), so renders are
bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidConfigError
from .images import ImageKind, OpticalPropertyMap, ScalarImage
from .lut import LookupTable, lut_forward_map
from .sfdi import DEFAULT_PHASES, FrameSet, HeightMap


class SceneKind(Enum):
    HOMOGENEOUS = "homogeneous"
    TWO_REGION = "two_region"
    GAUSSIAN_BLOBS = "gaussian_blobs"
    LINEAR_GRADIENT = "linear_gradient"
    TILTED_PLANE = "tilted_plane"


@dataclass(frozen=True)
class Scene:
    """Ground truth for one synthetic measurement."""

    name: str
    op: OpticalPropertyMap
    height_map: HeightMap | None = None

    def __post_init__(self):
        if self.height_map is not None and self.height_map.height.shape != self.op.mua.shape:
            raise InvalidConfigError("height map geometry differs from property maps")


@dataclass(frozen=True)
class CameraModel:
    """Source strength, noise, and geometry constants of the virtual camera.

    source_intensity        expected counts at h = 0 for unit reflectance;
                            the default puts the brightest frame of the
                            usual calibration phantom near half of the
                            16-bit full well, leaving clipping headroom
    read_noise_sigma        std-dev of additive Gaussian counts (0 = off)
    shot_noise              Poisson noise on expected counts
    quantization_bits       0 = continuous, else clip+round to 2^bits - 1
    height_falloff          counts per mm of elevation (usually negative)
    fringe_shift_per_height lateral fringe displacement per mm of height,
                            the triangulation constant linking height to
                            fringe phase: dphi = 2 pi fx * shift * h
    """

    source_intensity: float = 70000.0
    read_noise_sigma: float = 0.0
    shot_noise: bool = False
    quantization_bits: int = 0
    height_falloff: float = 0.0
    fringe_shift_per_height: float = 0.5

    def __post_init__(self):
        if self.source_intensity <= 0.0:
            raise InvalidConfigError("source_intensity must be positive")
        if self.read_noise_sigma < 0.0:
            raise InvalidConfigError("read_noise_sigma must be >= 0")
        if self.quantization_bits < 0 or self.quantization_bits > 16:
            raise InvalidConfigError("quantization_bits must be in [0, 16]")
        if self.fringe_shift_per_height < 0.0:
            raise InvalidConfigError("fringe_shift_per_height must be >= 0")

    def k_height(self, fx_prof: float) -> float:
        """Height per unit fringe phase at the given projected frequency."""
        if fx_prof <= 0.0 or self.fringe_shift_per_height == 0.0:
            raise InvalidConfigError("k_height needs fx_prof > 0 and a nonzero shift")
        return 1.0 / (2.0 * np.pi * fx_prof * self.fringe_shift_per_height)


@dataclass(frozen=True)
class IlluminationSpec:
    """One projected pattern: frequency (cycles/mm), phase, modulation depth."""

    fx: float
    phase: float = 0.0
    modulation_depth: float = 1.0

    def __post_init__(self):
        if self.fx < 0.0:
            raise InvalidConfigError("fx must be >= 0")
        if not (0.0 < self.modulation_depth <= 1.0):
            raise InvalidConfigError("modulation_depth must be in (0, 1]")


def _property_images(
    mua: np.ndarray, musp: np.ndarray, pitch: float
) -> OpticalPropertyMap:
    return OpticalPropertyMap(
        mua=ScalarImage(mua, ImageKind.ABSORPTION, pitch),
        musp=ScalarImage(musp, ImageKind.REDUCED_SCATTERING, pitch),
        valid=np.ones(mua.shape, dtype=bool),
    )


def make_scene(
    kind: SceneKind,
    width: int = 348,
    height: int = 260,
    pixel_pitch: float = 0.278,
    seed: int = 0,
    **params,
) -> Scene:
    """Construct a named ground-truth scene.

    Parameters by kind (all optical properties in mm^-1):

    HOMOGENEOUS      mua, musp
    TWO_REGION       mua_bg, musp_bg, mua_fg, musp_fg, split_frac
                     (vertical edge at split_frac of the width)
    GAUSSIAN_BLOBS   mua_bg, musp_bg, n_blobs, mua_amp, musp_amp,
                     plus clamp bounds mua_range, musp_range; blob
                     centres/sizes/signs drawn from `seed`
    LINEAR_GRADIENT  mua_lo, mua_hi (along x), musp_lo, musp_hi (along y)
    TILTED_PLANE     mua, musp, tilt_deg (rotation about the y axis),
                     base_height_mm; h = base + tan(tilt) * x with x
                     zero at the left edge, so tilt_deg=0 gives a flat
                     plane elevated by base_height_mm
    """
    if width < 8 or height < 8:
        raise InvalidConfigError("scene must be at least 8x8 pixels")
    shape = (height, width)
    x_mm = np.arange(width) * pixel_pitch
    y_mm = np.arange(height) * pixel_pitch

    def p(name, default=None):
        if name in params:
            return params.pop(name)
        if default is None:
            raise InvalidConfigError(f"scene kind {kind.value} requires parameter {name!r}")
        return default

    height_map = None
    if kind is SceneKind.HOMOGENEOUS:
        mua = np.full(shape, float(p("mua")))
        musp = np.full(shape, float(p("musp")))
        name = "homogeneous"
    elif kind is SceneKind.TWO_REGION:
        mua_bg, musp_bg = float(p("mua_bg")), float(p("musp_bg"))
        mua_fg, musp_fg = float(p("mua_fg")), float(p("musp_fg"))
        split = int(round(width * float(p("split_frac", 0.5))))
        mua = np.full(shape, mua_bg)
        musp = np.full(shape, musp_bg)
        mua[:, split:] = mua_fg
        musp[:, split:] = musp_fg
        name = "two_region"
    elif kind is SceneKind.GAUSSIAN_BLOBS:
        mua = np.full(shape, float(p("mua_bg", 0.02)))
        musp = np.full(shape, float(p("musp_bg", 1.0)))
        n_blobs = int(p("n_blobs", 3))
        mua_amp = float(p("mua_amp", 0.05))
        musp_amp = float(p("musp_amp", 0.5))
        mua_range = p("mua_range", (0.005, 0.4))
        musp_range = p("musp_range", (0.1, 4.0))
        rng = np.random.default_rng(seed)
        xx, yy = np.meshgrid(x_mm, y_mm)
        extent = min(x_mm[-1], y_mm[-1])
        for _ in range(n_blobs):
            cx = rng.uniform(0.2, 0.8) * x_mm[-1]
            cy = rng.uniform(0.2, 0.8) * y_mm[-1]
            sigma = rng.uniform(extent / 12.0, extent / 5.0)
            bump = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * sigma**2))
            mua += rng.uniform(-1.0, 1.0) * mua_amp * bump
            musp += rng.uniform(-1.0, 1.0) * musp_amp * bump
        np.clip(mua, *mua_range, out=mua)
        np.clip(musp, *musp_range, out=musp)
        name = "gaussian_blobs"
    elif kind is SceneKind.LINEAR_GRADIENT:
        mua_line = np.linspace(float(p("mua_lo")), float(p("mua_hi")), width)
        musp_line = np.linspace(float(p("musp_lo")), float(p("musp_hi")), height)
        mua = np.tile(mua_line, (height, 1))
        musp = np.tile(musp_line[:, None], (1, width))
        name = "linear_gradient"
    elif kind is SceneKind.TILTED_PLANE:
        mua = np.full(shape, float(p("mua")))
        musp = np.full(shape, float(p("musp")))
        tilt = np.deg2rad(float(p("tilt_deg", 10.0)))
        base = float(p("base_height_mm", 0.0))
        if not (0.0 <= tilt < np.pi / 2):
            raise InvalidConfigError("tilt_deg must be in [0, 90)")
        h = np.tile(base + np.tan(tilt) * x_mm, (height, 1))
        angle = np.full(shape, tilt)
        height_map = HeightMap(
            height=ScalarImage(h, ImageKind.HEIGHT, pixel_pitch),
            surface_angle=ScalarImage(angle, ImageKind.PHASE, pixel_pitch),
            flagged_rows=np.zeros(height, dtype=bool),
        )
        name = "tilted_plane"
    else:
        raise InvalidConfigError(f"unknown scene kind {kind!r}")

    if params:
        raise InvalidConfigError(f"unknown scene parameters {sorted(params)}")
    return Scene(name=name, op=_property_images(mua, musp, pixel_pitch), height_map=height_map)


def _reflectance_at(
    scene: Scene, lut: LookupTable, fx: float
) -> tuple[np.ndarray, np.ndarray]:
    """(rd_dc, rd at fx) maps for the scene's ground truth."""
    rd_dc, rd_ac = lut_forward_map(lut, scene.op.mua.data, scene.op.musp.data)
    if fx == 0.0:
        return rd_dc, rd_dc
    if abs(fx - lut.fx_ac) < 1e-9:
        return rd_dc, rd_ac
    frac = fx / lut.fx_ac
    return rd_dc, rd_dc + (rd_ac - rd_dc) * frac


def render_frame(
    scene: Scene,
    illum: IlluminationSpec,
    lut: LookupTable,
    cam: CameraModel,
    seed: int = 0,
    frame_index: int = 0,
) -> ScalarImage:
    """Render one frame of the scene under the given illumination."""
    pitch = scene.op.mua.pixel_pitch
    rd_dc, rd_fx = _reflectance_at(scene, lut, illum.fx)

    if scene.height_map is not None:
        h = scene.height_map.height.data
        tilt_cos = np.cos(scene.height_map.surface_angle.data)
    else:
        h = 0.0
        tilt_cos = 1.0
    source = cam.source_intensity + cam.height_falloff * h
    if np.min(source) <= 0.0:
        raise InvalidConfigError("height_falloff drives source intensity non-positive")

    x_mm = np.arange(scene.op.mua.width) * pitch
    carrier = 2.0 * np.pi * illum.fx * x_mm[np.newaxis, :]
    dphi = 2.0 * np.pi * illum.fx * cam.fringe_shift_per_height * h
    fringe = np.cos(carrier + illum.phase + dphi)
    expected = 0.5 * source * tilt_cos * (rd_dc + illum.modulation_depth * rd_fx * fringe)

    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, frame_index)))
    data = expected
    if cam.shot_noise:
        data = rng.poisson(np.maximum(data, 0.0)).astype(np.float64)
    if cam.read_noise_sigma > 0.0:
        data = data + rng.normal(0.0, cam.read_noise_sigma, size=data.shape)
    data = np.maximum(data, 0.0)
    if cam.quantization_bits > 0:
        full_scale = float(2**cam.quantization_bits - 1)
        data = np.floor(np.minimum(data, full_scale) + 0.5)
    return ScalarImage(data, ImageKind.INTENSITY, pitch)


def render_frameset(
    scene: Scene,
    lut: LookupTable,
    cam: CameraModel,
    fx_ac: float | None = None,
    phases: tuple[float, float, float] = DEFAULT_PHASES,
    modulation_depth: float = 1.0,
    seed: int = 0,
) -> FrameSet:
    """Render the six-image measurement (three DC then three AC frames).

    Frame indices 0..5 key the noise streams, so every frame's noise is
    independent but reproducible.
    """
    if fx_ac is None:
        fx_ac = lut.fx_ac
    dc = tuple(
        render_frame(
            scene,
            IlluminationSpec(0.0, phase, modulation_depth),
            lut,
            cam,
            seed=seed,
            frame_index=k,
        )
        for k, phase in enumerate(phases)
    )
    ac = tuple(
        render_frame(
            scene,
            IlluminationSpec(fx_ac, phase, modulation_depth),
            lut,
            cam,
            seed=seed,
            frame_index=3 + k,
        )
        for k, phase in enumerate(phases)
    )
    return FrameSet(dc_frames=dc, ac_frames=ac, fx_ac=fx_ac, phases=phases)


def render_profilometry(
    scene: Scene,
    lut: LookupTable,
    cam: CameraModel,
    fx_prof: float = 0.15,
    phases: tuple[float, float, float] = DEFAULT_PHASES,
    modulation_depth: float = 1.0,
    seed: int = 0,
) -> tuple[ScalarImage, ScalarImage, ScalarImage]:
    """Render the three profilometry frames (frame indices 6..8)."""
    if fx_prof <= 0.0:
        raise InvalidConfigError("fx_prof must be positive")
    return tuple(
        render_frame(
            scene,
            IlluminationSpec(fx_prof, phase, modulation_depth),
            lut,
            cam,
            seed=seed,
            frame_index=6 + k,
        )
        for k, phase in enumerate(phases)
    )
