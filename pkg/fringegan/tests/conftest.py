"""Shared fixtures: a tiny paired dataset and one expensive overfit run."""

import json
import time
from pathlib import Path

import numpy as np
import pytest
import torch
from PIL import Image

from fringegan import (
    train,
    TrainConfig,
    GeneratorConfig,
    DiscriminatorConfig,
    FusionGenerator,
    PatchFolder,
    to_unit_range,
)

OVERFIT_STEPS = 2000
OVERFIT_SEED = 0


def make_toy_dataset(root, size=64, count=4, seed=5):
    """Write a small paired dataset in the acquisition engine's layout.

    Inputs are fringe patterns of varying frequency and phase plus a vertical
    gradient; targets are piecewise-constant red/green maps with the blue
    channel left at zero, mirroring the real dataset's packing convention.
    """
    root = Path(root)
    (root / "ac" / "input").mkdir(parents=True, exist_ok=True)
    (root / "ac" / "target").mkdir(parents=True, exist_ok=True)
    yy, xx = np.mgrid[0:size, 0:size]
    half = size // 2
    patches = []
    for k in range(count):
        fringe = 0.5 + 0.4 * np.sin(2 * np.pi * (xx * (k + 2) / (size / 2.0)) + k)
        grad = yy / (size - 1.0) * 0.5
        inp = np.stack([fringe, grad, np.zeros_like(fringe)], axis=-1)
        red = np.where(xx < half, 0.2 + 0.15 * k, 0.6 - 0.1 * k)
        grn = np.where(yy < half, 0.3 + 0.1 * k, 0.8 - 0.15 * k)
        tgt = np.stack([red, grn, np.zeros_like(red)], axis=-1)
        for sub, arr in (("input", inp), ("target", tgt)):
            data = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
            Image.fromarray(data).save(root / "ac" / sub / f"toy_{k}.png")
        patches.append(
            {
                "mode": "ac",
                "scene": "toy",
                "index": k,
                "origin": [0, 0],
                "input": f"ac/input/toy_{k}.png",
                "target": f"ac/target/toy_{k}.png",
            }
        )
    manifest = {
        "patch_size": size,
        "input_scale": 4.0,
        "mua_max": 0.25,
        "musp_max": 2.5,
        "pixel_pitch_mm": 0.278,
        "patches": patches,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return root


def unit_nmae(generator, dataset):
    """Mean absolute error over mean absolute target, in [0, 1] units."""
    generator.eval()
    errs = []
    refs = []
    with torch.no_grad():
        for i in range(len(dataset)):
            x, y, _ = dataset[i]
            pred = to_unit_range(generator(x.unsqueeze(0))[0]).numpy()
            ref = to_unit_range(y).numpy()
            errs.append(np.abs(pred - ref).mean())
            refs.append(np.abs(ref).mean())
    return float(np.mean(errs) / np.mean(refs))


@pytest.fixture(scope="session")
def toy_root(tmp_path_factory):
    return make_toy_dataset(tmp_path_factory.mktemp("toyset"))


@pytest.fixture(scope="session")
def overfit(toy_root, tmp_path_factory):
    """One desk-scale training run shared by every test that needs a trained net.

    Returns (result, dataset_root, elapsed_seconds, untrained_nmae) where
    untrained_nmae is measured on a fresh generator built from the same seed
    before any updates.
    """
    dataset = PatchFolder(toy_root, "ac")
    torch.manual_seed(OVERFIT_SEED)
    untrained_nmae = unit_nmae(FusionGenerator(GeneratorConfig.desk()), dataset)
    out = tmp_path_factory.mktemp("overfit_run")
    start = time.perf_counter()
    result = train(
        toy_root,
        out,
        GeneratorConfig.desk(),
        DiscriminatorConfig.desk(),
        TrainConfig(steps=OVERFIT_STEPS, seed=OVERFIT_SEED),
    )
    elapsed = time.perf_counter() - start
    return result, toy_root, elapsed, untrained_nmae
