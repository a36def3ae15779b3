"""Named-tensor checkpoint archive.

Layout (all integers little-endian)::

    b"DFCK" | u32 format version | u64 header length | UTF-8 JSON header
    | zero padding to a 64-byte boundary | tensor blobs

The header holds the metadata, the tensor table (name, dtype, shape, byte
offset from the start of the blob section, byte length) and a SHA-256
content hash over the canonical metadata and every tensor's name, dtype,
shape and bytes. Every blob starts on a 64-byte boundary. Loading verifies
the structure and the hash, so a truncated or edited file is rejected.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
import hashlib
import json
import os
from pathlib import Path
import struct
import tempfile
from typing import Any, Final

from fastmcp.utilities.logging import get_logger
import numpy as np

from dense_face.constants import Constants
from dense_face.exceptions import ArtifactIOError, CheckpointCorruptError, ContractError

_logger = get_logger(__name__)

_PREAMBLE: Final[struct.Struct] = struct.Struct("<4sIQ")
_ALLOWED_DTYPES: Final[frozenset[str]] = frozenset({"<f4", "<f8", "<i8"})


@dataclass(frozen=True)
class TensorEntry:
    """One row of the tensor table."""

    name: str
    dtype: str
    shape: tuple[int, ...]
    offset: int
    nbytes: int

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "dtype": self.dtype,
            "shape": list(self.shape),
            "offset": self.offset,
            "nbytes": self.nbytes,
        }


@dataclass(frozen=True)
class CheckpointArchive:
    """A decoded checkpoint."""

    metadata: dict[str, Any]
    tensors: dict[str, np.ndarray]
    entries: tuple[TensorEntry, ...]
    content_hash: str
    version: int = Constants.CHECKPOINT_VERSION


def _align(n: int) -> int:
    step = Constants.CHECKPOINT_ALIGN
    return -(-n // step) * step


def _canonical(metadata: Mapping[str, Any]) -> bytes:
    return json.dumps(metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _little_endian(arr: np.ndarray) -> np.ndarray:
    target = np.dtype(arr.dtype).newbyteorder("<")
    out = np.ascontiguousarray(arr, dtype=target)
    if out.dtype.str not in _ALLOWED_DTYPES:
        msg = f"checkpoint tensors must be float32, float64 or int64; got {arr.dtype}"
        raise ContractError(msg)
    return out


def content_hash(metadata: Mapping[str, Any], tensors: Mapping[str, np.ndarray]) -> str:
    """SHA-256 hex digest over canonical metadata and every tensor, in name order."""
    digest = hashlib.sha256(_canonical(metadata))
    for name in sorted(tensors):
        arr = _little_endian(tensors[name])
        digest.update(name.encode("utf-8"))
        digest.update(arr.dtype.str.encode("ascii"))
        digest.update(json.dumps(list(arr.shape)).encode("ascii"))
        digest.update(arr.tobytes())
    return digest.hexdigest()


def encode_archive(metadata: Mapping[str, Any], tensors: Mapping[str, np.ndarray]) -> bytes:
    """Serialize to the archive byte layout.

    Raises:
        ContractError: If a tensor has an unsupported dtype or metadata is not JSON
    """
    arrays = {name: _little_endian(tensors[name]) for name in sorted(tensors)}
    entries: list[TensorEntry] = []
    offset = 0
    for name, arr in arrays.items():
        entries.append(TensorEntry(name, arr.dtype.str, tuple(arr.shape), offset, arr.nbytes))
        offset = _align(offset + arr.nbytes)
    try:
        header = {
            "metadata": dict(metadata),
            "tensors": [e.to_json() for e in entries],
            "content_hash": content_hash(metadata, arrays),
        }
        header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    except TypeError as exc:
        msg = f"checkpoint metadata is not JSON-serializable: {exc}"
        raise ContractError(msg) from exc
    preamble = _PREAMBLE.pack(
        Constants.CHECKPOINT_MAGIC, Constants.CHECKPOINT_VERSION, len(header_bytes)
    )
    head = preamble + header_bytes
    out = bytearray(head)
    out.extend(b"\0" * (_align(len(head)) - len(head)))
    blob_start = len(out)
    for entry, arr in zip(entries, arrays.values(), strict=True):
        out.extend(b"\0" * (blob_start + entry.offset - len(out)))
        out.extend(arr.tobytes())
    return bytes(out)


def _corrupt(reason: str) -> CheckpointCorruptError:
    msg = f"corrupt checkpoint: {reason}"
    return CheckpointCorruptError(msg)


def _parse_header(data: bytes) -> tuple[int, dict[str, Any], int]:
    if len(data) < _PREAMBLE.size:
        raise _corrupt("file shorter than the preamble")
    magic, version, header_len = _PREAMBLE.unpack_from(data)
    if magic != Constants.CHECKPOINT_MAGIC:
        raise _corrupt(f"bad magic {magic!r}")
    if version != Constants.CHECKPOINT_VERSION:
        raise _corrupt(f"unsupported format version {version}")
    end = _PREAMBLE.size + header_len
    if end > len(data):
        raise _corrupt("truncated header")
    try:
        header = json.loads(data[_PREAMBLE.size : end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise _corrupt(f"unreadable header ({exc})") from exc
    required = {"metadata", "tensors", "content_hash"}
    if not isinstance(header, dict) or not required <= header.keys():
        raise _corrupt("header is missing required keys")
    return version, header, _align(end)


def _entry(raw: Mapping[str, Any]) -> TensorEntry:
    try:
        entry = TensorEntry(
            name=str(raw["name"]),
            dtype=str(raw["dtype"]),
            shape=tuple(int(d) for d in raw["shape"]),
            offset=int(raw["offset"]),
            nbytes=int(raw["nbytes"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise _corrupt(f"malformed tensor table row ({exc})") from exc
    if entry.dtype not in _ALLOWED_DTYPES:
        raise _corrupt(f"tensor '{entry.name}' has unsupported dtype {entry.dtype}")
    expected = int(np.prod(entry.shape, dtype=np.int64)) * np.dtype(entry.dtype).itemsize
    if entry.nbytes != expected or entry.offset % Constants.CHECKPOINT_ALIGN:
        raise _corrupt(f"tensor '{entry.name}' has an inconsistent table row")
    return entry


def decode_archive(data: bytes) -> CheckpointArchive:
    """Parse and verify archive bytes.

    Raises:
        CheckpointCorruptError: On bad magic, truncation, a malformed table or
            a content-hash mismatch
    """
    version, header, blob_start = _parse_header(data)
    entries = tuple(_entry(raw) for raw in header["tensors"])
    tensors: dict[str, np.ndarray] = {}
    for entry in entries:
        start = blob_start + entry.offset
        if start + entry.nbytes > len(data):
            raise _corrupt(f"tensor '{entry.name}' runs past the end of the file")
        flat = np.frombuffer(data[start : start + entry.nbytes], dtype=np.dtype(entry.dtype))
        tensors[entry.name] = flat.reshape(entry.shape).copy()
    metadata = header["metadata"]
    digest = content_hash(metadata, tensors)
    if digest != header["content_hash"]:
        raise _corrupt("content hash mismatch")
    return CheckpointArchive(metadata, tensors, entries, digest, version)


def save_checkpoint(
    path: Path, tensors: Mapping[str, np.ndarray], metadata: Mapping[str, Any]
) -> str:
    """Write an archive atomically (temp file then rename); return its content hash.

    Raises:
        ArtifactIOError: If the file cannot be written
    """
    data = encode_archive(metadata, tensors)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            Path(tmp).replace(path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
    except OSError as exc:
        msg = f"cannot write checkpoint {path}: {exc}"
        raise ArtifactIOError(msg) from exc
    _, header, _ = _parse_header(data)
    digest = str(header["content_hash"])
    _logger.info("Wrote checkpoint %s (%d tensors, sha256 %s)", path, len(tensors), digest)
    return digest


def read_checkpoint_bytes(path: Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        msg = f"cannot read checkpoint {path}: {exc}"
        raise ArtifactIOError(msg) from exc


def load_checkpoint(path: Path) -> CheckpointArchive:
    """Read and verify an archive.

    Raises:
        ArtifactIOError: If the file cannot be read
        CheckpointCorruptError: If the file fails verification
    """
    return decode_archive(read_checkpoint_bytes(path))
