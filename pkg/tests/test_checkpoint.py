from __future__ import annotations

from pathlib import Path
import struct

import numpy as np
import pytest

from dense_face.constants import Constants
from dense_face.exceptions import (
    ArtifactIOError,
    CheckpointCorruptError,
    ConfigError,
    ContractError,
)
from dense_face.network import DenseFaceNetwork
from dense_face.services import ModelService
from dense_face.training import (
    content_hash,
    decode_archive,
    encode_archive,
    load_checkpoint,
    save_checkpoint,
)

TENSORS = {
    "b.bias": np.arange(3, dtype=np.float32),
    "a.weight": np.linspace(-1.0, 1.0, 12).reshape(3, 4),
    "steps": np.array([7], dtype=np.int64),
}
META = {"format": "test", "nested": {"k": [1, 2]}}


def test_archive_round_trip_and_alignment() -> None:
    data = encode_archive(META, TENSORS)
    assert data[:4] == Constants.CHECKPOINT_MAGIC
    archive = decode_archive(data)
    assert archive.metadata == META
    assert [e.name for e in archive.entries] == ["a.weight", "b.bias", "steps"]
    assert all(e.offset % Constants.CHECKPOINT_ALIGN == 0 for e in archive.entries)
    for name, arr in TENSORS.items():
        np.testing.assert_array_equal(archive.tensors[name], arr)
        assert archive.tensors[name].dtype == arr.dtype
    assert archive.content_hash == content_hash(META, TENSORS)


def test_hash_ignores_insertion_order() -> None:
    reordered = dict(reversed(list(TENSORS.items())))
    assert encode_archive(META, reordered) == encode_archive(META, TENSORS)
    changed = {**TENSORS, "steps": np.array([8], dtype=np.int64)}
    assert content_hash(META, changed) != content_hash(META, TENSORS)


def test_unsupported_dtype_is_rejected() -> None:
    with pytest.raises(ContractError):
        encode_archive(META, {"x": np.zeros(2, dtype=np.int32)})
    with pytest.raises(ContractError):
        encode_archive({"bad": object()}, TENSORS)


def test_corruption_is_detected() -> None:
    data = encode_archive(META, TENSORS)
    flipped = bytearray(data)
    flipped[-1] ^= 0xFF
    with pytest.raises(CheckpointCorruptError):
        decode_archive(bytes(flipped))
    with pytest.raises(CheckpointCorruptError):
        decode_archive(data[:-4])
    with pytest.raises(CheckpointCorruptError):
        decode_archive(b"XXXX" + data[4:])
    with pytest.raises(CheckpointCorruptError):
        decode_archive(data[:10])
    newer = struct.pack("<4sI", Constants.CHECKPOINT_MAGIC, 99) + data[8:]
    with pytest.raises(CheckpointCorruptError):
        decode_archive(newer)


def test_save_is_atomic_and_load_verifies(tmp_path: Path) -> None:
    path = tmp_path / "nested" / "ckpt.dfck"
    digest = save_checkpoint(path, TENSORS, META)
    assert load_checkpoint(path).content_hash == digest
    assert [p.name for p in path.parent.iterdir()] == ["ckpt.dfck"]
    with pytest.raises(ArtifactIOError):
        load_checkpoint(tmp_path / "missing.dfck")


def test_network_round_trip(network: DenseFaceNetwork, tmp_path: Path) -> None:
    path = tmp_path / "net.dfck"
    digest = ModelService.save(path, network)
    loaded = ModelService.load(path)
    assert loaded.content_hash == digest
    assert loaded.metadata["groups"] == ["base", "adapter", "identity"]
    assert loaded.training is None
    assert loaded.optimizer_tensors == {}
    restored = loaded.network
    assert restored.config == network.config
    assert restored.vocab == network.vocab
    original = network.state_dict()
    for name, arr in restored.state_dict().items():
        np.testing.assert_array_equal(arr, original[name], err_msg=name)
    assert all(not p.requires_grad for p in restored.parameters())


def test_non_model_checkpoint_is_a_config_error(tmp_path: Path) -> None:
    path = tmp_path / "other.dfck"
    save_checkpoint(path, TENSORS, META)
    with pytest.raises(ConfigError):
        ModelService.load(path)


def test_edited_network_checkpoint_is_corrupt(
    network: DenseFaceNetwork, tmp_path: Path
) -> None:
    path = tmp_path / "net.dfck"
    ModelService.save(path, network)
    data = bytearray(path.read_bytes())
    data[-1] ^= 0x01
    path.write_bytes(bytes(data))
    with pytest.raises(CheckpointCorruptError):
        ModelService.load(path)
