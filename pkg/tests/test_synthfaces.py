from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from dense_face.conditioning import PoseCondition, Vocabulary, tokenize
from dense_face.exceptions import (
    ArtifactIOError,
    ConfigError,
    DomainError,
    PoseRecoveryError,
)
from dense_face.imaging import from_uint8
from dense_face.synthfaces import (
    SpriteDataset,
    SpriteSpec,
    caption_of,
    caption_words,
    direction_of,
    generate_dataset,
    heldout_count,
    load_dataset,
    recover_pose,
    render,
    sample_spec,
    sprite_landmarks,
)

from .conftest import POSES_PER_IDENTITY, SPRITE_COUNT

MID = (0.5,) * 8


def _tree(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()
    }


def test_dataset_is_identical_across_worker_counts(tmp_path: Path) -> None:
    generate_dataset(12, 3, tmp_path / "serial", poses_per_identity=4, workers=1)
    generate_dataset(12, 3, tmp_path / "pooled", poses_per_identity=4, workers=4)
    serial = _tree(tmp_path / "serial")
    assert len(serial) == 12 * 5 + 1
    assert serial == _tree(tmp_path / "pooled")


def test_different_seeds_give_different_sprites() -> None:
    assert sample_spec(1, 0, 0) != sample_spec(2, 0, 0)
    assert sample_spec(1, 0, 0) == sample_spec(1, 0, 0)


def test_heldout_identities_are_disjoint(sprites: SpriteDataset) -> None:
    assert len(sprites) == SPRITE_COUNT
    assert sprites.identities("heldout") == {3}
    assert sprites.identities("train") == {0, 1, 2}
    assert sprites.indices("heldout").tolist() == list(range(15, 20))
    for entry in sprites.entries:
        assert entry.identity == entry.index // POSES_PER_IDENTITY
    assert heldout_count(1) == 0
    assert heldout_count(2) == 1
    assert heldout_count(25) == 2


def test_identity_params_shared_within_identity(sprites: SpriteDataset) -> None:
    first = sprites.entries[0].id_params
    assert all(e.id_params == first for e in sprites.entries[:POSES_PER_IDENTITY])
    assert sprites.entries[POSES_PER_IDENTITY].id_params != first


def test_loaded_sprites_match_renderer(sprites: SpriteDataset) -> None:
    for index in (0, 7, 19):
        sample = render(sprites.spec(index))
        np.testing.assert_array_equal(sprites.images[index], sample.pixels)
        ann = sprites.annotations[index]
        np.testing.assert_array_equal(ann.hard_mask(), sample.annotations.hard_mask())
        np.testing.assert_allclose(ann.landmarks, sample.annotations.landmarks, atol=1e-6)
        assert sprites.entries[index].caption == sample.caption


def test_batch_layout(sprites: SpriteDataset) -> None:
    batch = sprites.batch([0, 16], dtype=np.float64)
    assert batch.x0.shape == (2, 3, 64, 64)
    assert batch.x0.dtype == np.float64
    assert batch.id_params.shape == (2, 8)
    assert batch.identities.tolist() == [0, 3]
    assert len(batch.poses) == len(batch.annotations) == 2


def test_generate_and_load_errors(tmp_path: Path) -> None:
    with pytest.raises(ConfigError):
        generate_dataset(0, 0, tmp_path)
    with pytest.raises(ArtifactIOError):
        load_dataset(tmp_path / "nowhere")


def test_render_is_exact_and_annotated() -> None:
    spec = SpriteSpec(id_params=MID, pose=PoseCondition(10, -5, 3), background=2, seed=9)
    a, b = render(spec), render(spec)
    np.testing.assert_array_equal(a.image, b.image)
    np.testing.assert_array_equal(from_uint8(a.pixels), a.image)
    ann = a.annotations
    ann.validate()
    assert ann.hard_mask().any()
    assert (ann.depth[~ann.hard_mask()] == 0.0).all()
    assert (ann.depth[ann.hard_mask()] > 0.0).all()


def test_sprite_spec_domain() -> None:
    with pytest.raises(DomainError):
        SpriteSpec(id_params=(0.5,) * 7)
    with pytest.raises(DomainError):
        SpriteSpec(id_params=(1.5,) + (0.5,) * 7)
    with pytest.raises(DomainError):
        SpriteSpec(id_params=MID, background=8)


@pytest.mark.parametrize(
    "pose",
    [(0, 0, 0), (30, -20, 10), (-45, 45, -45), (12.5, 7.25, 44.0)],
)
def test_recover_pose_inverts_renderer(pose: tuple[float, float, float]) -> None:
    params = (0.2, 0.9, 0.4, 0.3, 0.6, 0.1, 0.7, 0.8)
    spec = SpriteSpec(id_params=params, pose=PoseCondition(*pose))
    got = recover_pose(sprite_landmarks(spec))
    np.testing.assert_allclose(got.as_array(), np.asarray(pose, dtype=np.float64), atol=1e-6)


def test_recover_pose_errors() -> None:
    with pytest.raises(PoseRecoveryError):
        recover_pose(np.zeros((5, 2)))
    with pytest.raises(PoseRecoveryError):
        recover_pose(np.zeros((4, 2)))


@pytest.mark.parametrize(
    ("pose", "word"),
    [
        ((20, 0, 0), "right"),
        ((-20, 5, 0), "left"),
        ((5, 20, 0), "down"),
        ((0, -30, 0), "up"),
        ((10, -10, 40), "ahead"),
        ((15, 0, 0), "ahead"),
    ],
)
def test_direction_words(pose: tuple[float, float, float], word: str) -> None:
    assert direction_of(PoseCondition(*pose)) == word


def test_captions_stay_in_vocabulary() -> None:
    vocab = Vocabulary.from_words(caption_words())
    for index in range(8):
        caption = caption_of(sample_spec(5, index, index))
        assert caption.startswith("a face with ")
        assert set(caption.split()) <= caption_words()
        assert tokenize(caption, vocab, 16).shape == (16,)
