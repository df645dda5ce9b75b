"""Command line entry points."""

import pytest

from fringegan.cli import main

from conftest import make_toy_dataset


def test_train_and_predict_commands(tmp_path, capsys):
    root = make_toy_dataset(tmp_path / "data")
    rc = main([
        "train", "--dataset", str(root), "--out", str(tmp_path / "run"),
        "--steps", "8", "--seed", "1",
    ])
    assert rc == 0
    out = capsys.readouterr().out
    assert "trained 8 steps" in out
    assert (tmp_path / "run" / "checkpoint.pt").exists()
    assert (tmp_path / "run" / "losses.csv").exists()

    rc = main([
        "predict", "--checkpoint", str(tmp_path / "run" / "checkpoint.pt"),
        "--dataset", str(root), "--out", str(tmp_path / "pred"),
    ])
    assert rc == 0
    assert "wrote 4 predicted patches" in capsys.readouterr().out
    for k in range(4):
        assert (tmp_path / "pred" / f"toy_{k}.png").exists()


def test_errors_are_reported_not_raised(tmp_path, capsys):
    rc = main([
        "train", "--dataset", str(tmp_path / "nothing"), "--out", str(tmp_path / "run"),
        "--steps", "1",
    ])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_unknown_command_exits():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
