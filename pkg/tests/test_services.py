from __future__ import annotations

from pathlib import Path

import pytest

from dense_face.exceptions import ArtifactIOError, ConfigError
from dense_face.models import TrainConfig
from dense_face.services import ConfigService, RunRecorder, read_manifest, write_manifest


def test_threads_from_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("DENSEFACE_THREADS", "3")
    assert ConfigService.threads() == 3
    assert ConfigService.workers() == 3
    assert ConfigService.workers(deterministic=True) == 1
    monkeypatch.setenv("DENSEFACE_THREADS", "0")
    assert ConfigService.threads() == 1
    monkeypatch.setenv("DENSEFACE_THREADS", "many")
    assert ConfigService.threads() >= 1


def test_log_level_from_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("DENSEFACE_LOG_LEVEL", raising=False)
    assert ConfigService.log_level() == "INFO"
    monkeypatch.setenv("DENSEFACE_LOG_LEVEL", "debug")
    assert ConfigService.log_level() == "DEBUG"
    monkeypatch.setenv("DENSEFACE_LOG_LEVEL", "chatty")
    assert ConfigService.log_level() == "INFO"


def test_parse_key_value_and_json() -> None:
    text = "# tiny run\nsteps = 20\nlearning-rate=0.01\n\nchannel_mults = 1,2\n"
    parsed = ConfigService.parse_config_text(text)
    assert parsed == {"steps": "20", "learning_rate": "0.01", "channel_mults": "1,2"}
    assert ConfigService.parse_config_text('{"steps": 5}') == {"steps": 5}
    with pytest.raises(ConfigError):
        ConfigService.parse_config_text("steps 20")
    with pytest.raises(ConfigError):
        ConfigService.parse_config_text("{not json")


def test_precedence_defaults_file_flags(tmp_path: Path) -> None:
    path = tmp_path / "train.cfg"
    path.write_text("steps=20\nseed=4\nchannel_mults=1,2\nschedule=linear\n", encoding="utf-8")
    cfg = ConfigService.resolve_train_config(path, {"seed": 9, "batch_size": None})
    assert cfg.steps == 20
    assert cfg.seed == 9
    assert cfg.batch_size == TrainConfig().batch_size
    assert cfg.channel_mults == [1, 2]
    assert cfg.schedule == "linear"


def test_invalid_configuration(tmp_path: Path) -> None:
    with pytest.raises(ConfigError):
        ConfigService.resolve_train_config(overrides={"steps": 0})
    with pytest.raises(ConfigError):
        ConfigService.resolve_train_config(overrides={"unknown_key": 1})
    with pytest.raises(ConfigError):
        ConfigService.resolve_train_config(overrides={"timesteps": 5})
    with pytest.raises(ArtifactIOError):
        ConfigService.resolve_train_config(tmp_path / "missing.cfg")


def test_recorder_writes_manifest_on_success(tmp_path: Path) -> None:
    path = tmp_path / "run.manifest.json"
    rec = RunRecorder("synth", path)
    rec.set_config({"n": 4})
    rec.set_config({"seed": 1})
    rec.seed("dataset", 1)
    rec.checkpoint(tmp_path / "m.dfck", "abc")
    rec.artifact("dataset", tmp_path / "data")
    rec.finish(0)
    manifest = read_manifest(path)
    assert manifest.command == "synth"
    assert manifest.status == "ok"
    assert manifest.exit_code == 0
    assert manifest.config == {"n": 4, "seed": 1}
    assert manifest.seeds == {"dataset": 1}
    assert manifest.checkpoints == {str(tmp_path / "m.dfck"): "abc"}
    assert manifest.wall_clock_sec is not None
    assert manifest.finished_at is not None


def test_recorder_marks_failures(tmp_path: Path) -> None:
    path = tmp_path / "fail.manifest.json"
    manifest = RunRecorder("train", path).finish(3, "corrupt checkpoint: bad magic")
    assert manifest.status == "error"
    assert read_manifest(path).error == "corrupt checkpoint: bad magic"


def test_manifest_io_errors(tmp_path: Path) -> None:
    with pytest.raises(ArtifactIOError):
        read_manifest(tmp_path / "none.json")
    blocker = tmp_path / "file"
    blocker.write_text("x", encoding="utf-8")
    manifest = RunRecorder("eval").finish(0)
    with pytest.raises(ArtifactIOError):
        write_manifest(blocker / "sub" / "m.json", manifest)
