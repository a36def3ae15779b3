"""Synthetic dataset generation and loading.

Layout under the output directory::

    images/NNNNNN.ppm  masks/NNNNNN.pgm  depth/NNNNNN.pgm
    landmarks/NNNNNN.txt  captions/NNNNNN.txt  manifest.jsonl

Every random draw comes from a generator seeded by splitmix64 of the master
seed and the sample (or identity) index, so the files are identical for a
given ``(n, seed)`` whatever the worker count.
"""

from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math
from pathlib import Path
from typing import Final, Literal

from fastmcp.utilities.logging import get_logger
import numpy as np

from dense_face.annotations import AnnotationSet, load_annotations, write_landmarks
from dense_face.conditioning import PoseCondition
from dense_face.constants import Constants
from dense_face.exceptions import ArtifactIOError, ConfigError
from dense_face.imaging import from_uint8, read_rgb, unit_to_uint8, write_image

from .models import DatasetEntry, DatasetSummary
from .palettes import PALETTE_SIZE
from .renderer import SpriteSample, SpriteSpec, render

_logger = get_logger(__name__)

_MASK64: Final[int] = (1 << 64) - 1
_IDENTITY_STREAM: Final[int] = 0x1D5EED
_SAMPLE_STREAM: Final[int] = 0x5A3B1E
SUBDIRS: Final[tuple[str, ...]] = ("images", "masks", "depth", "landmarks", "captions")
MANIFEST_NAME: Final[str] = "manifest.jsonl"


def splitmix64(x: int) -> int:
    """One step of the splitmix64 mixer."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, stream: int, index: int) -> int:
    return splitmix64(splitmix64((seed & _MASK64) ^ stream) ^ index)


def identity_params(seed: int, identity: int) -> tuple[float, ...]:
    rng = np.random.default_rng(derive_seed(seed, _IDENTITY_STREAM, identity))
    return tuple(float(p) for p in rng.uniform(0.0, 1.0, Constants.ID_PARAM_COUNT))


def sample_spec(seed: int, index: int, identity: int) -> SpriteSpec:
    sample_seed = derive_seed(seed, _SAMPLE_STREAM, index)
    rng = np.random.default_rng(sample_seed)
    limit = Constants.POSE_LIMIT_DEG
    yaw, pitch, roll = (float(a) for a in rng.uniform(-limit, limit, 3))
    return SpriteSpec(
        id_params=identity_params(seed, identity),
        pose=PoseCondition(yaw, pitch, roll),
        background=int(rng.integers(0, PALETTE_SIZE)),
        seed=sample_seed,
    )


def heldout_count(identities: int) -> int:
    """Identities reserved for evaluation: a tenth, at least one when there are two or more."""
    if identities <= 1:
        return 0
    return max(1, int(identities * Constants.HELDOUT_FRACTION))


Split = Literal["train", "heldout"]


def _entry(
    spec: SpriteSpec, index: int, identity: int, split: Split, caption: str
) -> DatasetEntry:
    stem = f"{index:06d}"
    return DatasetEntry(
        index=index,
        identity=identity,
        split=split,
        id_params=list(spec.id_params),
        pose=[spec.pose.yaw, spec.pose.pitch, spec.pose.roll],
        background=spec.background,
        seed=spec.seed,
        caption=caption,
        image=f"images/{stem}.ppm",
        mask=f"masks/{stem}.pgm",
        depth=f"depth/{stem}.pgm",
        landmarks=f"landmarks/{stem}.txt",
        caption_file=f"captions/{stem}.txt",
    )


def _write_sample(root: Path, entry: DatasetEntry, sample: SpriteSample) -> None:
    write_image(root / entry.image, sample.pixels)
    write_image(root / entry.mask, unit_to_uint8(sample.annotations.mask))
    write_image(root / entry.depth, unit_to_uint8(sample.annotations.depth))
    write_landmarks(root / entry.landmarks, sample.annotations.landmarks)
    try:
        (root / entry.caption_file).write_text(sample.caption + "\n", encoding="utf-8")
    except OSError as exc:
        msg = f"cannot write caption {entry.caption_file}: {exc}"
        raise ArtifactIOError(msg) from exc


def generate_dataset(
    n: int,
    seed: int,
    out_dir: Path,
    *,
    poses_per_identity: int = Constants.POSES_PER_IDENTITY,
    workers: int = 1,
) -> DatasetSummary:
    """Render and write ``n`` sprites.

    Sample ``k`` belongs to identity ``k // poses_per_identity``; the last
    identities (a tenth, at least one) form the held-out split.

    Raises:
        ConfigError: If ``n`` or ``poses_per_identity`` is not positive
        ArtifactIOError: If the directory or a file cannot be written
    """
    if n < 1 or poses_per_identity < 1:
        msg = f"n and poses_per_identity must be >= 1, got {n} and {poses_per_identity}"
        raise ConfigError(msg)
    identities = math.ceil(n / poses_per_identity)
    first_heldout = identities - heldout_count(identities)
    try:
        for sub in SUBDIRS:
            (out_dir / sub).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        msg = f"cannot create dataset directory {out_dir}: {exc}"
        raise ArtifactIOError(msg) from exc

    def build(index: int) -> DatasetEntry:
        identity = index // poses_per_identity
        spec = sample_spec(seed, index, identity)
        sample = render(spec)
        split: Split = "heldout" if identity >= first_heldout else "train"
        entry = _entry(spec, index, identity, split, sample.caption)
        _write_sample(out_dir, entry, sample)
        return entry

    _logger.info("Rendering %d sprites (%d identities) into %s", n, identities, out_dir)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        entries = list(pool.map(build, range(n)))

    manifest = out_dir / MANIFEST_NAME
    lines = "".join(entry.model_dump_json() + "\n" for entry in entries)
    try:
        manifest.write_text(lines, encoding="utf-8")
    except OSError as exc:
        msg = f"cannot write manifest {manifest}: {exc}"
        raise ArtifactIOError(msg) from exc
    return DatasetSummary(
        root=str(out_dir),
        n=n,
        seed=seed,
        poses_per_identity=poses_per_identity,
        identities=identities,
        heldout_identities=list(range(first_heldout, identities)),
        manifest=str(manifest),
    )


def read_manifest(root: Path) -> list[DatasetEntry]:
    path = root / MANIFEST_NAME
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        msg = f"cannot read dataset manifest {path}: {exc}"
        raise ArtifactIOError(msg) from exc
    return [DatasetEntry.model_validate_json(line) for line in text.splitlines() if line.strip()]


@dataclass(frozen=True)
class SpriteBatch:
    """Training batch: clean images ``[B, 3, S, S]`` and their conditioning."""

    x0: np.ndarray
    captions: list[str]
    id_params: np.ndarray
    poses: list[PoseCondition]
    annotations: list[AnnotationSet]
    identities: np.ndarray


@dataclass(frozen=True)
class SpriteDataset:
    """A dataset loaded into memory (8-bit images, float annotations)."""

    root: Path
    entries: list[DatasetEntry]
    images: np.ndarray
    annotations: list[AnnotationSet]

    def __len__(self) -> int:
        return len(self.entries)

    def indices(self, split: Split) -> np.ndarray:
        return np.array([e.index for e in self.entries if e.split == split], dtype=np.int64)

    def identities(self, split: Split) -> set[int]:
        return {e.identity for e in self.entries if e.split == split}

    def spec(self, index: int) -> SpriteSpec:
        e = self.entries[index]
        return SpriteSpec(
            id_params=tuple(e.id_params),
            pose=PoseCondition(*e.pose),
            background=e.background,
            seed=e.seed,
        )

    def batch(
        self, indices: Sequence[int] | np.ndarray, dtype: type[np.floating] = np.float32
    ) -> SpriteBatch:
        rows = [int(i) for i in indices]
        return SpriteBatch(
            x0=np.stack([from_uint8(self.images[i], dtype) for i in rows]),
            captions=[self.entries[i].caption for i in rows],
            id_params=np.array([self.entries[i].id_params for i in rows], dtype=np.float64),
            poses=[PoseCondition(*self.entries[i].pose) for i in rows],
            annotations=[self.annotations[i] for i in rows],
            identities=np.array([self.entries[i].identity for i in rows], dtype=np.int64),
        )


def load_dataset(root: Path, *, workers: int = 1) -> SpriteDataset:
    """Load a dataset written by ``generate_dataset``.

    Raises:
        ArtifactIOError: If the manifest or any listed file is missing
    """
    entries = read_manifest(root)
    if not entries:
        msg = f"dataset manifest in {root} lists no samples"
        raise ArtifactIOError(msg)

    def read(entry: DatasetEntry) -> tuple[np.ndarray, AnnotationSet]:
        pixels = read_rgb(root / entry.image)
        ann = load_annotations(root / entry.mask, root / entry.depth, root / entry.landmarks)
        return pixels, ann

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        loaded = list(pool.map(read, entries))
    _logger.info("Loaded %d sprites from %s", len(entries), root)
    return SpriteDataset(
        root=root,
        entries=entries,
        images=np.stack([p for p, _ in loaded]),
        annotations=[a for _, a in loaded],
    )
