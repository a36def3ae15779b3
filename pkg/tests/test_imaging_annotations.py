from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from dense_face.annotations import (
    AnnotationSet,
    export_annotations,
    load_annotations,
    read_landmarks,
    write_landmarks,
)
from dense_face.exceptions import ArtifactIOError, ContractError, DimensionError
from dense_face.imaging import (
    crop_to_mask,
    from_uint8,
    mask_bbox,
    read_gray,
    read_rgb,
    to_uint8,
    unit_to_uint8,
    write_image,
)

LANDMARKS = np.array([[20.5, 25.0], [43.5, 25.0], [32.0, 36.0], [26.0, 44.0], [38.0, 44.0]])


def _annotations(size: int = 16) -> AnnotationSet:
    yy, xx = np.mgrid[0:size, 0:size]
    mask = ((xx - size / 2) ** 2 + (yy - size / 2) ** 2 < (size / 3) ** 2).astype(np.float64)
    depth = mask * 0.5
    return AnnotationSet(landmarks=LANDMARKS * size / 64, mask=mask, depth=depth)


def test_uint8_codec_is_exact_on_bytes() -> None:
    pixels = np.random.default_rng(0).integers(0, 256, (8, 8, 3), dtype=np.uint8)
    np.testing.assert_array_equal(to_uint8(from_uint8(pixels, np.float64)), pixels)
    np.testing.assert_array_equal(to_uint8(np.full((3, 2, 2), 5.0))[0, 0], [255, 255, 255])
    with pytest.raises(DimensionError):
        to_uint8(np.zeros((2, 2, 3)))
    with pytest.raises(DimensionError):
        from_uint8(np.zeros((3, 2, 2), dtype=np.uint8))


@pytest.mark.parametrize("suffix", [".ppm", ".png"])
def test_rgb_file_round_trip(tmp_path: Path, suffix: str) -> None:
    pixels = np.random.default_rng(1).integers(0, 256, (6, 5, 3), dtype=np.uint8)
    path = tmp_path / f"img{suffix}"
    write_image(path, pixels)
    np.testing.assert_array_equal(read_rgb(path), pixels)


def test_gray_file_round_trip(tmp_path: Path) -> None:
    values = np.linspace(0.0, 1.0, 16).reshape(4, 4)
    path = tmp_path / "map.pgm"
    write_image(path, unit_to_uint8(values))
    np.testing.assert_array_equal(read_gray(path), unit_to_uint8(values))


def test_image_io_errors(tmp_path: Path) -> None:
    with pytest.raises(ArtifactIOError):
        write_image(tmp_path / "img.bmp", np.zeros((2, 2, 3), dtype=np.uint8))
    with pytest.raises(DimensionError):
        write_image(tmp_path / "img.png", np.zeros((2, 2, 3)))
    with pytest.raises(ArtifactIOError):
        read_rgb(tmp_path / "missing.ppm")
    (tmp_path / "junk.png").write_bytes(b"not an image")
    with pytest.raises(ArtifactIOError):
        read_gray(tmp_path / "junk.png")


def test_mask_bbox_and_crop() -> None:
    mask = np.zeros((8, 8), dtype=bool)
    assert mask_bbox(mask) is None
    assert crop_to_mask(np.zeros((3, 8, 8)), mask, 4) is None
    mask[2:5, 3:7] = True
    assert mask_bbox(mask) == (2, 5, 3, 7)
    crop = crop_to_mask(np.zeros((3, 8, 8)), mask, 4)
    assert crop is not None
    assert crop.shape == (3, 4, 4)


def test_annotation_set_shapes_and_ranges() -> None:
    ann = _annotations()
    ann.validate()
    assert ann.size == 16
    assert ann.hard_mask().dtype == bool
    with pytest.raises(DimensionError):
        AnnotationSet(landmarks=np.zeros((4, 2)), mask=ann.mask, depth=ann.depth)
    with pytest.raises(DimensionError):
        AnnotationSet(landmarks=ann.landmarks, mask=ann.mask, depth=ann.depth[:8])
    outside = AnnotationSet(landmarks=ann.landmarks + 100.0, mask=ann.mask, depth=ann.depth)
    with pytest.raises(ContractError):
        outside.validate()
    negative = AnnotationSet(landmarks=ann.landmarks, mask=ann.mask, depth=ann.depth - 1.0)
    with pytest.raises(ContractError):
        negative.validate()


def test_landmark_file_round_trip(tmp_path: Path) -> None:
    path = tmp_path / "lmk.txt"
    write_landmarks(path, LANDMARKS)
    np.testing.assert_allclose(read_landmarks(path), LANDMARKS, atol=1e-6)
    path.write_text("left_eye 1 2\nright_eye 3 4\n", encoding="utf-8")
    with pytest.raises(ArtifactIOError):
        read_landmarks(path)


def test_export_then_load_annotations(tmp_path: Path) -> None:
    ann = _annotations()
    paths = export_annotations(ann, tmp_path, stem="face")
    assert paths["mask"].name == "face_mask.pgm"
    loaded = load_annotations(paths["mask"], paths["depth"], paths["landmarks"])
    np.testing.assert_array_equal(loaded.hard_mask(), ann.hard_mask())
    np.testing.assert_allclose(loaded.depth, ann.depth, atol=1.0 / 255)
    np.testing.assert_allclose(loaded.landmarks, ann.landmarks, atol=1e-6)
