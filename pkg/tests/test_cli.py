from __future__ import annotations

import json
from pathlib import Path

import pytest

from dense_face.cli import EXIT_CORRUPT, EXIT_IO, EXIT_OK, EXIT_USAGE, run
from dense_face.network import DenseFaceNetwork
from dense_face.services import ModelService, read_manifest
from dense_face.synthfaces import MANIFEST_NAME

from .conftest import TINY_LOOP, TINY_MODEL


@pytest.fixture
def checkpoint(network: DenseFaceNetwork, tmp_path: Path) -> tuple[Path, str]:
    path = tmp_path / "model.dfck"
    return path, ModelService.save(path, network)


def test_usage_errors() -> None:
    assert run([]) == EXIT_USAGE
    assert run(["synth", "--out", "x", "--n", "many"]) == EXIT_USAGE
    assert run(["generate", "--ckpt", "m.dfck"]) == EXIT_USAGE
    assert run(["--log-level", "chatty", "inspect", "--ckpt", "m.dfck"]) == EXIT_USAGE


def test_synth_writes_dataset_and_manifest(tmp_path: Path) -> None:
    out = tmp_path / "data"
    argv = ["synth", "--n", "6", "--seed", "2", "--poses-per-identity", "3", "--out", str(out)]
    assert run(argv) == EXIT_OK
    assert (out / MANIFEST_NAME).is_file()
    manifest = read_manifest(tmp_path / "data.manifest.json")
    assert manifest.command == "synth"
    assert manifest.status == "ok"
    assert manifest.seeds == {"dataset": 2}
    assert manifest.config["n"] == 6


def test_missing_inputs_are_io_errors(tmp_path: Path) -> None:
    assert run(["inspect", "--ckpt", str(tmp_path / "none.dfck")]) == EXIT_IO
    inspected = read_manifest(tmp_path / "none.dfck.inspect.manifest.json")
    assert inspected.command == "inspect"
    assert inspected.status == "error"
    assert inspected.exit_code == EXIT_IO
    out = tmp_path / "m.dfck"
    argv = ["train", "--data", str(tmp_path / "nodata"), "--out", str(out)]
    assert run(argv) == EXIT_IO
    manifest = read_manifest(tmp_path / "m.dfck.manifest.json")
    assert manifest.status == "error"
    assert manifest.exit_code == EXIT_IO


def test_corrupt_checkpoint_exit_code(checkpoint: tuple[Path, str]) -> None:
    path, _ = checkpoint
    data = bytearray(path.read_bytes())
    data[-1] ^= 0x01
    path.write_bytes(bytes(data))
    assert run(["inspect", "--ckpt", str(path)]) == EXIT_CORRUPT
    inspected = read_manifest(path.with_name("model.dfck.inspect.manifest.json"))
    assert inspected.exit_code == EXIT_CORRUPT
    out = path.parent / "gen"
    argv = ["generate", "--ckpt", str(path), "--out", str(out), "--steps", "1"]
    assert run(argv) == EXIT_CORRUPT
    assert read_manifest(path.parent / "gen.manifest.json").exit_code == EXIT_CORRUPT


def test_inspect_lists_tensors(
    checkpoint: tuple[Path, str], capsys: pytest.CaptureFixture[str]
) -> None:
    path, digest = checkpoint
    assert run(["inspect", "--ckpt", str(path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert f"content hash {digest}" in out
    assert "groups base, adapter, identity" in out
    assert "unet.conv_out.weight" in out
    assert "stored configuration:" in out
    manifest = read_manifest(path.with_name("model.dfck.inspect.manifest.json"))
    assert manifest.status == "ok"
    assert manifest.checkpoints == {str(path): digest}


def test_face_mode_needs_one_identity(checkpoint: tuple[Path, str], tmp_path: Path) -> None:
    path, _ = checkpoint
    out = tmp_path / "face"
    argv = ["generate", "--mode", "face", "--ckpt", str(path), "--out", str(out)]
    assert run(argv) == EXIT_USAGE
    manifest = read_manifest(tmp_path / "face.manifest.json")
    assert manifest.status == "error"
    assert manifest.error is not None
    assert "--id-spec" in manifest.error


def test_generate_personalized_writes_outputs(
    checkpoint: tuple[Path, str], tmp_path: Path
) -> None:
    path, digest = checkpoint
    out = tmp_path / "gen"
    argv = [
        "generate",
        "--mode",
        "personalized",
        "--caption",
        "a face with red hair and gray eyes looking up on a green background",
        "--id-spec",
        "0.2,0.4,0.6,0.8,0.1,0.3,0.5,0.7",
        "--pose",
        "0,-20,0",
        "--mask",
        "ellipse",
        "--steps",
        "1",
        "--format",
        "png",
        "--ckpt",
        str(path),
        "--out",
        str(out),
    ]
    assert run(argv) == EXIT_OK
    for name in ("final.png", "base.png", "mask.png"):
        assert (out / name).is_file()
    manifest = read_manifest(tmp_path / "gen.manifest.json")
    assert manifest.checkpoints == {str(path): digest}
    assert manifest.config["mask_resolved"] == "ellipse"
    assert manifest.seeds == {"generate": 0}


def test_train_base_phase(sprite_root: Path, tmp_path: Path) -> None:
    config = tmp_path / "tiny.json"
    config.write_text(json.dumps({**TINY_MODEL, **TINY_LOOP}), encoding="utf-8")
    out = tmp_path / "base.dfck"
    argv = [
        "train",
        "--config",
        str(config),
        "--data",
        str(sprite_root),
        "--steps",
        "1",
        "--out",
        str(out),
    ]
    assert run(argv) == EXIT_OK
    loaded = ModelService.load(out)
    assert loaded.training is not None
    assert loaded.training.step == 1
    manifest = read_manifest(tmp_path / "base.dfck.manifest.json")
    assert manifest.config["steps"] == 1
    assert manifest.checkpoints == {str(out): loaded.content_hash}

    adapter = ["train", "--phase", "adapter", "--data", str(sprite_root), "--out", str(out)]
    assert run(adapter) == EXIT_USAGE
