"""Dataset reading, byte mapping, and validation errors."""

import json

import numpy as np
import pytest
import torch
from PIL import Image

from fringegan import PatchFolder, read_manifest, save_patch_png, DatasetError
from fringegan.data import to_symmetric_range, to_unit_range

from conftest import make_toy_dataset


def test_patch_folder_reads_pairs_in_manifest_order(tmp_path):
    root = make_toy_dataset(tmp_path)
    ds = PatchFolder(root, "ac")
    assert len(ds) == 4
    names = []
    for i in range(len(ds)):
        x, y, name = ds[i]
        assert x.shape == (3, 64, 64) and y.shape == (3, 64, 64)
        assert x.dtype == torch.float32
        assert float(x.min()) >= -1.0 and float(x.max()) <= 1.0
        names.append(name)
    assert names == ["toy_0", "toy_1", "toy_2", "toy_3"]


def test_byte_values_map_linearly_to_symmetric_range(tmp_path):
    root = tmp_path
    (root / "ac" / "input").mkdir(parents=True)
    (root / "ac" / "target").mkdir(parents=True)
    arr = np.zeros((8, 8, 3), dtype=np.uint8)
    arr[0, 0] = [0, 128, 255]
    Image.fromarray(arr).save(root / "ac" / "input" / "a_0.png")
    Image.fromarray(arr).save(root / "ac" / "target" / "a_0.png")
    manifest = {
        "patch_size": 8,
        "mua_max": 0.25,
        "musp_max": 2.5,
        "patches": [
            {"mode": "ac", "scene": "a", "index": 0,
             "input": "ac/input/a_0.png", "target": "ac/target/a_0.png"}
        ],
    }
    (root / "manifest.json").write_text(json.dumps(manifest))
    x, _, _ = PatchFolder(root, "ac")[0]
    assert float(x[0, 0, 0]) == pytest.approx(-1.0, abs=1e-7)
    assert float(x[1, 0, 0]) == pytest.approx(2 * 128 / 255 - 1, abs=1e-7)
    assert float(x[2, 0, 0]) == pytest.approx(1.0, abs=1e-7)


def test_range_remaps_are_inverse():
    grid = torch.linspace(0, 1, 101)
    back = to_unit_range(torch.as_tensor(to_symmetric_range(grid)))
    assert torch.allclose(back, grid, atol=1e-7)
    assert float(to_unit_range(torch.tensor([-2.0])).min()) == 0.0
    assert float(to_unit_range(torch.tensor([2.0])).max()) == 1.0


def test_save_patch_png_rounds_to_nearest_byte(tmp_path):
    t = torch.zeros(3, 2, 2)
    t[0, 0, 0] = 0.5
    t[1, 0, 0] = 0.999
    t[2, 0, 0] = -0.3   # clamped to 0
    t[0, 1, 1] = 1.2    # clamped to 1
    path = tmp_path / "out.png"
    save_patch_png(path, t)
    arr = np.asarray(Image.open(path))
    assert arr[0, 0, 0] == 128   # floor(0.5 * 255 + 0.5)
    assert arr[0, 0, 1] == 255   # floor(0.999 * 255 + 0.5)
    assert arr[0, 0, 2] == 0
    assert arr[1, 1, 0] == 255


def test_save_patch_png_rejects_bad_shape(tmp_path):
    with pytest.raises(DatasetError):
        save_patch_png(tmp_path / "bad.png", torch.zeros(1, 4, 4))


def test_manifest_validation(tmp_path):
    with pytest.raises(DatasetError):
        read_manifest(tmp_path)  # missing file
    (tmp_path / "manifest.json").write_text("{not json")
    with pytest.raises(DatasetError):
        read_manifest(tmp_path)
    (tmp_path / "manifest.json").write_text(json.dumps({"patch_size": 64}))
    with pytest.raises(DatasetError):
        read_manifest(tmp_path)


def test_missing_mode_and_missing_file_rejected(tmp_path):
    root = make_toy_dataset(tmp_path)
    with pytest.raises(DatasetError):
        PatchFolder(root, "dc")
    (root / "ac" / "input" / "toy_0.png").unlink()
    with pytest.raises(DatasetError):
        PatchFolder(root, "ac")[0]


def test_patch_size_mismatch_rejected(tmp_path):
    root = make_toy_dataset(tmp_path)
    manifest = json.loads((root / "manifest.json").read_text())
    manifest["patch_size"] = 32
    (root / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(DatasetError):
        PatchFolder(root, "ac")[0]
