"""Command line driver.

Subcommands cover the full loop: build a reflectance table, render a
synthetic measurement, process it with the six-image or single-snapshot
pipeline, export training patches, score recovered maps, and reproduce
the bundled phantom-grid study.

A measurement directory (written by `synth`, read by `sfdi`/`ssop`)
holds:

    scene.json                 geometry, frequencies, camera settings
    dc_0..2.png / ac_0..2.png  16-bit frames plus sidecars
    prof_0..2.png              profilometry frames (when rendered)
    truth_mua.raw / truth_musp.raw / truth_height.raw
                               ground truth as raw float64

Exit codes: 0 success, 1 runtime failure (reported on stderr), 2 usage.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import IoError, MalformedMetadataError, SfdOpticsError, UnknownKeyError
from .evalkit import (
    PatchMode,
    StridePolicy,
    centered_roi,
    compare_report,
    export_patches,
    import_prediction,
    read_manifest,
    write_report_csv,
)
from .images import ImageKind, OpticalPropertyMap, ScalarImage, load_image, save_image
from .lut import DEFAULT_FX_AC, LookupTable, build_lut, load_lut, save_lut
from .mc import TransportConfig
from .sfdi import (
    FrameSet,
    HeightCalibration,
    calibrate_from_phantom,
    process_sfdi,
    process_sfdi_profile_corrected,
    profilometry_phase,
)
from .ssop import SsopFilterConfig, process_ssop
from .synth import CameraModel, Scene, SceneKind, make_scene, render_frameset, render_profilometry

log = logging.getLogger(__name__)

LUT_CACHE_ENV = "SFDOPTICS_LUT_CACHE"


@dataclass(frozen=True)
class RunConfig:
    """Shared run settings; defaults match the reference system.

    Loadable from a JSON file whose keys must all be known (typos fail
    loudly instead of silently falling back to defaults).
    """

    seed: int = 12345
    threads: int = 1
    fx_ac: float = DEFAULT_FX_AC
    fx_prof: float = 0.15
    pixel_pitch_mm: float = 0.278
    wavelength_nm: float = 660.0
    source_intensity: float = 70000.0
    ref_mua: float = 0.0239
    ref_musp: float = 0.957
    export_mode: str = PatchMode.AC_RAW.value
    photons: int = 500_000
    anisotropy_g: float = 0.9
    n_medium: float = 1.4

    @classmethod
    def from_mapping(cls, mapping: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise UnknownKeyError(f"unknown config keys {unknown}; known: {sorted(known)}")
        return cls(**mapping)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            mapping = json.loads(Path(path).read_text())
        except OSError as exc:
            raise IoError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise MalformedMetadataError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(mapping, dict):
            raise MalformedMetadataError("config root must be a JSON object")
        return cls.from_mapping(mapping)


def _transport_config(cfg: RunConfig) -> TransportConfig:
    return TransportConfig(
        photon_count=cfg.photons,
        anisotropy_g=cfg.anisotropy_g,
        n_medium=cfg.n_medium,
        rng_seed=cfg.seed,
    )


def resolve_lut(cfg: RunConfig, lut_path: str | None) -> LookupTable:
    """Find or build the lookup table.

    Order: explicit --lut path, then the $SFDOPTICS_LUT_CACHE file (built
    and saved there when the variable is set but the file is absent),
    else a fresh in-memory build.
    """
    if lut_path:
        return load_lut(lut_path)
    cache = os.environ.get(LUT_CACHE_ENV)
    if cache:
        cache_path = Path(cache)
        if cache_path.exists():
            log.info("loading lookup table from cache %s", cache_path)
            return load_lut(cache_path)
        log.info("building lookup table into cache %s", cache_path)
        table = build_lut(_transport_config(cfg), fx_ac=cfg.fx_ac, threads=cfg.threads)
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        save_lut(table, cache_path)
        return table
    log.info("building lookup table in memory (%d photons)", cfg.photons)
    return build_lut(_transport_config(cfg), fx_ac=cfg.fx_ac, threads=cfg.threads)


# -- measurement directories ---------------------------------------------------


def _camera_from_args(cfg: RunConfig, args) -> CameraModel:
    return CameraModel(
        source_intensity=cfg.source_intensity,
        read_noise_sigma=getattr(args, "read_noise", 0.0),
        shot_noise=getattr(args, "shot_noise", False),
        quantization_bits=getattr(args, "quantization_bits", 0),
        height_falloff=getattr(args, "height_falloff", 0.0),
    )


def write_measurement(
    out: Path,
    scene: Scene,
    frames: FrameSet,
    prof_frames,
    cfg: RunConfig,
    cam: CameraModel,
    scene_kind: str,
    params: dict,
) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(frames.dc_frames):
        save_image(img, out / f"dc_{i}.png", fmt="png16")
    for i, img in enumerate(frames.ac_frames):
        save_image(img, out / f"ac_{i}.png", fmt="png16")
    if prof_frames is not None:
        for i, img in enumerate(prof_frames):
            save_image(img, out / f"prof_{i}.png", fmt="png16")
    save_image(scene.op.mua, out / "truth_mua.raw")
    save_image(scene.op.musp, out / "truth_musp.raw")
    if scene.height_map is not None:
        save_image(scene.height_map.height, out / "truth_height.raw")
    meta = {
        "name": scene.name,
        "kind": scene_kind,
        "params": params,
        "fx_ac": frames.fx_ac,
        "fx_prof": cfg.fx_prof if prof_frames is not None else None,
        "pixel_pitch_mm": scene.op.mua.pixel_pitch,
        "wavelength_nm": cfg.wavelength_nm,
        "camera": {
            "source_intensity": cam.source_intensity,
            "read_noise_sigma": cam.read_noise_sigma,
            "shot_noise": cam.shot_noise,
            "quantization_bits": cam.quantization_bits,
            "height_falloff": cam.height_falloff,
            "fringe_shift_per_height": cam.fringe_shift_per_height,
        },
    }
    (out / "scene.json").write_text(json.dumps(meta, indent=1))


def read_measurement(path: str | Path):
    """Returns (meta, FrameSet, prof_frames_or_None)."""
    path = Path(path)
    try:
        meta = json.loads((path / "scene.json").read_text())
    except OSError as exc:
        raise IoError(f"{path} is not a measurement directory: {exc}") from exc
    dc = tuple(load_image(path / f"dc_{i}.png", ImageKind.INTENSITY) for i in range(3))
    ac = tuple(load_image(path / f"ac_{i}.png", ImageKind.INTENSITY) for i in range(3))
    frames = FrameSet(dc_frames=dc, ac_frames=ac, fx_ac=meta["fx_ac"])
    prof = None
    if (path / "prof_0.png").exists():
        prof = tuple(load_image(path / f"prof_{i}.png", ImageKind.INTENSITY) for i in range(3))
    return meta, frames, prof


def read_truth(path: str | Path) -> OpticalPropertyMap:
    path = Path(path)
    mua = load_image(path / "truth_mua.raw", ImageKind.ABSORPTION)
    musp = load_image(path / "truth_musp.raw", ImageKind.REDUCED_SCATTERING)
    return OpticalPropertyMap(mua=mua, musp=musp, valid=np.ones(mua.shape, dtype=bool))


def write_property_maps(out: Path, op: OpticalPropertyMap) -> None:
    out.mkdir(parents=True, exist_ok=True)
    save_image(op.mua, out / "mua.raw")
    save_image(op.musp, out / "musp.raw")
    Image.fromarray((op.valid * np.uint8(255))).save(out / "valid.png")
    (out / "maps.json").write_text(
        json.dumps({"profile_corrected": op.profile_corrected}, indent=1)
    )


def read_property_maps(path: str | Path) -> OpticalPropertyMap:
    path = Path(path)
    if (path / "mua.raw").exists():
        mua = load_image(path / "mua.raw", ImageKind.ABSORPTION)
        musp = load_image(path / "musp.raw", ImageKind.REDUCED_SCATTERING)
        valid_file = path / "valid.png"
        if valid_file.exists():
            valid = np.asarray(Image.open(valid_file)) > 0
        else:
            valid = np.ones(mua.shape, dtype=bool)
        corrected = False
        maps_meta = path / "maps.json"
        if maps_meta.exists():
            corrected = bool(json.loads(maps_meta.read_text()).get("profile_corrected", False))
        return OpticalPropertyMap(mua=mua, musp=musp, valid=valid, profile_corrected=corrected)
    if (path / "truth_mua.raw").exists():
        return read_truth(path)
    raise IoError(f"{path} holds neither recovered maps nor ground truth")


# -- subcommand implementations --------------------------------------------------


def cmd_lut(args, cfg: RunConfig) -> int:
    t_cfg = _transport_config(cfg)
    mua_grid = np.geomspace(*args.grid_mua[:2], int(args.grid_mua[2])) if args.grid_mua else None
    musp_grid = (
        np.geomspace(*args.grid_musp[:2], int(args.grid_musp[2])) if args.grid_musp else None
    )
    table = build_lut(t_cfg, mua_grid, musp_grid, fx_ac=cfg.fx_ac, threads=cfg.threads)
    save_lut(table, args.out)
    print(f"wrote {args.out} ({table.shape[0]}x{table.shape[1]} nodes, fx_ac={table.fx_ac})")
    return 0


def _parse_scene_params(pairs: list[str]) -> dict:
    params = {}
    for pair in pairs:
        if "=" not in pair:
            raise UnknownKeyError(f"scene parameter {pair!r} is not key=value")
        key, value = pair.split("=", 1)
        try:
            params[key] = float(value)
        except ValueError:
            params[key] = value
    return params


def cmd_synth(args, cfg: RunConfig) -> int:
    lut = resolve_lut(cfg, args.lut)
    kind = SceneKind(args.scene)
    params = _parse_scene_params(args.param)
    scene = make_scene(
        kind,
        width=args.width,
        height=args.height,
        pixel_pitch=cfg.pixel_pitch_mm,
        seed=cfg.seed,
        **params,
    )
    cam = _camera_from_args(cfg, args)
    frames = render_frameset(scene, lut, cam, fx_ac=cfg.fx_ac, seed=cfg.seed)
    prof = None
    if args.profilometry:
        prof = render_profilometry(scene, lut, cam, fx_prof=cfg.fx_prof, seed=cfg.seed)
    write_measurement(Path(args.out), scene, frames, prof, cfg, cam, args.scene, params)
    print(f"wrote measurement {args.out} ({scene.name}, {args.width}x{args.height})")
    return 0


def _calibration_from_dir(reference_dir: str, lut: LookupTable, cfg: RunConfig):
    meta, frames, prof = read_measurement(reference_dir)
    cal = calibrate_from_phantom(
        frames,
        lut,
        ref_mua=cfg.ref_mua,
        ref_musp=cfg.ref_musp,
        wavelength_nm=cfg.wavelength_nm,
    )
    return meta, cal, prof


def cmd_sfdi(args, cfg: RunConfig) -> int:
    lut = resolve_lut(cfg, args.lut)
    ref_meta, cal, ref_prof = _calibration_from_dir(args.reference, lut, cfg)
    meta, frames, prof = read_measurement(args.measurement)
    if args.profile_corrected:
        if prof is None or ref_prof is None:
            raise IoError("profile-corrected processing needs prof_*.png in both directories")
        fx_prof = meta["fx_prof"]
        camera = ref_meta["camera"]
        shift = camera["fringe_shift_per_height"]
        k_height = 1.0 / (2.0 * np.pi * fx_prof * shift)
        ref_phase, _ = profilometry_phase(*ref_prof, fx_prof=fx_prof)
        s0 = camera["source_intensity"]
        falloff = camera["height_falloff"]
        heights = np.array([-50.0, 0.0, 50.0])
        scale = (s0 + falloff * heights) / s0
        height_cal = HeightCalibration(
            k_height_mm_per_rad=k_height,
            fx_prof=fx_prof,
            reference_phase=ref_phase,
            heights=heights,
            amplitude_scale=scale,
        )
        op = process_sfdi_profile_corrected(frames, prof, cal, lut, height_cal)
    else:
        op = process_sfdi(frames, cal, lut)
    write_property_maps(Path(args.out), op)
    print(f"wrote maps {args.out} (valid fraction {op.valid_fraction:.3f})")
    return 0


def cmd_ssop(args, cfg: RunConfig) -> int:
    lut = resolve_lut(cfg, args.lut)
    _, cal, _ = _calibration_from_dir(args.reference, lut, cfg)
    if args.frame:
        frame = load_image(args.frame, ImageKind.INTENSITY)
    else:
        _, frames, _ = read_measurement(args.measurement)
        frame = frames.ac_frames[0]
    op = process_ssop(frame, cal, lut, SsopFilterConfig(), border_px=args.border)
    write_property_maps(Path(args.out), op)
    print(f"wrote maps {args.out} (valid fraction {op.valid_fraction:.3f})")
    return 0


def cmd_dataset(args, cfg: RunConfig) -> int:
    lut = resolve_lut(cfg, args.lut)
    _, cal, _ = _calibration_from_dir(args.reference, lut, cfg)
    mode = PatchMode(args.mode)
    policy = (
        StridePolicy("tiled")
        if args.policy == "tiled"
        else StridePolicy("random", seed=cfg.seed, count=args.count)
    )
    total = 0
    for measurement in args.measurement:
        meta, frames, _ = read_measurement(measurement)
        frame = frames.ac_frames[0] if mode.wants_fringes else frames.dc_frames[0]
        frame_fx = meta["fx_ac"] if mode.wants_fringes else 0.0
        if args.targets == "truth":
            op = read_truth(measurement)
        else:
            op = read_property_maps(args.targets)
        pairs = export_patches(
            frame,
            op,
            cal,
            mode,
            args.out,
            scene=meta["name"],
            policy=policy,
            frame_fx=frame_fx,
            start_index=total,
        )
        total += len(pairs)
    print(f"wrote {total} patch pairs under {args.out}")
    return 0


def cmd_eval(args, cfg: RunConfig) -> int:
    reports = []
    if args.dataset:
        manifest = read_manifest(args.dataset)
        pred_root = Path(args.pred)
        for entry in manifest["patches"]:
            if args.mode and entry["mode"] != args.mode:
                continue
            pred_path = pred_root / Path(entry["target"]).name
            if not pred_path.exists():
                pred_path = pred_root / entry["mode"] / "predicted" / Path(entry["target"]).name
            pred = import_prediction(pred_path, manifest)
            ref = import_prediction(Path(args.dataset) / entry["target"], manifest)
            reports.append(
                compare_report(
                    pred,
                    ref,
                    scene=f"{entry['scene']}#{entry['index']}",
                    method=args.method,
                )
            )
    else:
        pred = read_property_maps(args.pred)
        truth = read_property_maps(args.truth)
        reports.append(
            compare_report(pred, truth, scene=args.scene, method=args.method)
        )
    write_report_csv(reports, args.out)
    print(f"wrote {args.out} ({len(reports)} rows)")
    return 0


# -- the bundled phantom-grid study ---------------------------------------------


def run_phantom_study(
    cfg: RunConfig,
    out_csv: str | Path,
    mua_values=None,
    musp_values=None,
    width: int = 348,
    height: int = 260,
    shot_noise: bool = False,
    lut: LookupTable | None = None,
) -> Path:
    """Render a grid of homogeneous phantoms and score both pipelines.

    Eighteen phantoms by default (six absorption levels crossed with
    three scattering levels).  Each one is rendered, processed with the
    six-image pipeline and the single-snapshot pipeline, and compared to
    ground truth; rows go to one CSV.  Fully deterministic for a given
    seed, regardless of thread count.
    """
    if mua_values is None:
        mua_values = np.linspace(0.02, 0.15, 6)
    if musp_values is None:
        musp_values = np.array([0.3, 0.9, 1.5])
    if lut is None:
        lut = resolve_lut(cfg, None)

    cam = CameraModel(source_intensity=cfg.source_intensity, shot_noise=shot_noise)
    reference = make_scene(
        SceneKind.HOMOGENEOUS,
        width=width,
        height=height,
        pixel_pitch=cfg.pixel_pitch_mm,
        mua=cfg.ref_mua,
        musp=cfg.ref_musp,
    )
    ref_frames = render_frameset(reference, lut, cam, fx_ac=cfg.fx_ac, seed=cfg.seed)
    cal = calibrate_from_phantom(
        ref_frames, lut, ref_mua=cfg.ref_mua, ref_musp=cfg.ref_musp,
        wavelength_nm=cfg.wavelength_nm,
    )

    reports = []
    roi = centered_roi((height, width))
    for i, mua in enumerate(mua_values):
        for j, musp in enumerate(musp_values):
            scene = make_scene(
                SceneKind.HOMOGENEOUS,
                width=width,
                height=height,
                pixel_pitch=cfg.pixel_pitch_mm,
                mua=float(mua),
                musp=float(musp),
            )
            name = f"phantom_{i}{j}_mua{mua:.4f}_musp{musp:.3f}"
            seed = cfg.seed + 1000 * i + 100 * j + 1
            frames = render_frameset(scene, lut, cam, fx_ac=cfg.fx_ac, seed=seed)
            op_sfdi = process_sfdi(frames, cal, lut)
            op_ssop = process_ssop(frames.ac_frames[0], cal, lut)
            reports.append(compare_report(op_sfdi, scene.op, name, "sfdi", roi))
            reports.append(compare_report(op_ssop, scene.op, name, "ssop", roi))
    return write_report_csv(reports, out_csv)


def cmd_reproduce(args, cfg: RunConfig) -> int:
    lut = resolve_lut(cfg, args.lut)
    path = run_phantom_study(
        cfg,
        args.out,
        width=args.width,
        height=args.height,
        shot_noise=args.shot_noise,
        lut=lut,
    )
    print(f"wrote {path}")
    return 0


# -- argument wiring --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfdoptics",
        description="Spatial-frequency-domain optics: tables, rendering, recovery, datasets.",
    )
    parser.add_argument("--config", help="JSON file with RunConfig overrides")
    parser.add_argument("--seed", type=int, help="base RNG seed")
    parser.add_argument("--threads", type=int, help="worker threads for simulation")
    parser.add_argument("--log-level", default="warning", help="logging level name")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lut", help="build and save a reflectance table")
    p.add_argument("--out", required=True)
    p.add_argument("--photons", type=int)
    p.add_argument("--grid-mua", type=float, nargs=3, metavar=("LO", "HI", "N"))
    p.add_argument("--grid-musp", type=float, nargs=3, metavar=("LO", "HI", "N"))
    p.set_defaults(func=cmd_lut)

    p = sub.add_parser("synth", help="render a synthetic measurement directory")
    p.add_argument("--scene", required=True, choices=[k.value for k in SceneKind])
    p.add_argument("--param", action="append", default=[], help="scene key=value")
    p.add_argument("--width", type=int, default=348)
    p.add_argument("--height", type=int, default=260)
    p.add_argument("--out", required=True)
    p.add_argument("--lut")
    p.add_argument("--profilometry", action="store_true")
    p.add_argument("--shot-noise", action="store_true")
    p.add_argument("--read-noise", type=float, default=0.0)
    p.add_argument("--quantization-bits", type=int, default=0)
    p.add_argument("--height-falloff", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sfdi", help="six-image processing of a measurement")
    p.add_argument("--measurement", required=True)
    p.add_argument("--reference", required=True, help="phantom measurement directory")
    p.add_argument("--lut")
    p.add_argument("--out", required=True)
    p.add_argument("--profile-corrected", action="store_true")
    p.set_defaults(func=cmd_sfdi)

    p = sub.add_parser("ssop", help="single-snapshot processing")
    p.add_argument("--measurement")
    p.add_argument("--frame", help="process this frame instead of the measurement's ac_0")
    p.add_argument("--reference", required=True)
    p.add_argument("--lut")
    p.add_argument("--border", type=int, default=16)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ssop)

    p = sub.add_parser("dataset", help="export paired training patches")
    p.add_argument("--measurement", action="append", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--targets", default="truth", help="'truth' or a recovered-maps directory")
    p.add_argument("--mode", default=PatchMode.AC_RAW.value,
                   choices=[m.value for m in PatchMode])
    p.add_argument("--policy", default="random", choices=["random", "tiled"])
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--lut")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("eval", help="score recovered maps or predicted patches")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth")
    p.add_argument("--dataset")
    p.add_argument("--mode")
    p.add_argument("--scene", default="scene")
    p.add_argument("--method", default="method")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser(
        "reproduce-phantom-study",
        help="render and score the bundled 18-phantom grid",
    )
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int, default=348)
    p.add_argument("--height", type=int, default=260)
    p.add_argument("--shot-noise", action="store_true")
    p.add_argument("--lut")
    p.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.WARNING))

    try:
        cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.threads is not None:
            overrides["threads"] = args.threads
        if getattr(args, "photons", None):
            overrides["photons"] = args.photons
        if overrides:
            cfg = replace(cfg, **overrides)
        return args.func(args, cfg)
    except SfdOpticsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
