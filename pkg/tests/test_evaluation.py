from __future__ import annotations

from collections.abc import Callable

import numpy as np
import pytest

from dense_face.annotations import AnnotationSet
from dense_face.conditioning import PoseCondition
from dense_face.exceptions import ConfigError, DimensionError
from dense_face.evaluation import (
    EvalReport,
    EvalSettings,
    attribute_regions,
    derangement,
    eval_annotations,
    eval_attributes,
    eval_background,
    eval_diversity,
    eval_identity,
    eval_pose,
    evaluate_checkpoint,
    parse_caption,
    pick_samples,
)
from dense_face.models import TrainConfig
from dense_face.network import DenseFaceNetwork
from dense_face.pipeline import ellipse_mask
from dense_face.synthfaces import SpriteDataset, SpriteSample, SpriteSpec, render
from dense_face.synthfaces.renderer import sprite_landmarks
from dense_face.training import new_network, train_phase_identity

POSES = [
    PoseCondition(0.0, 0.0, 0.0),
    PoseCondition(20.0, -10.0, 5.0),
    PoseCondition(-30.0, 15.0, -8.0),
]


def _sprites() -> list[SpriteSample]:
    params = [
        (0.1, 0.9, 0.3, 0.5, 0.2, 0.4, 0.15, 0.8),
        (0.7, 0.2, 0.9, 0.1, 0.6, 0.9, 0.55, 0.3),
        (0.5, 0.5, 0.0, 1.0, 1.0, 0.0, 0.95, 0.05),
    ]
    return [
        render(SpriteSpec(id_params=p, pose=pose, background=i * 3))
        for i, (p, pose) in enumerate(zip(params, POSES, strict=True))
    ]


def test_ground_truth_renders_score_perfect_attributes() -> None:
    sprites = _sprites()
    metric = eval_attributes(
        [s.pixels for s in sprites], [s.caption for s in sprites], [s.annotations for s in sprites]
    )
    assert metric.count == 3
    assert metric.hair == 1.0
    assert metric.eye == 1.0
    assert metric.background == 1.0


def test_attribute_regions_are_populated() -> None:
    regions = attribute_regions(_sprites()[0].annotations)
    assert regions["hair"].sum() > 0
    assert regions["eye"].sum() > 0
    assert not regions["background"][:56].any()
    assert regions["background"].sum() > 0


def test_unparsable_captions_are_skipped() -> None:
    (sample, *_) = _sprites()
    metric = eval_attributes([sample.pixels], ["a smiling face"], [sample.annotations])
    assert metric.count == 0
    assert metric.skipped == 1
    assert metric.hair is None
    with pytest.raises(DimensionError):
        eval_attributes([sample.pixels], [], [sample.annotations])


def test_parse_caption() -> None:
    caption = "a face with red hair and amber eyes looking down on a white background"
    assert parse_caption(caption) == {
        "hair": "red",
        "eye": "amber",
        "direction": "down",
        "background": "white",
    }
    assert parse_caption("a face") is None


def test_pose_from_exact_landmarks() -> None:
    specs = [SpriteSpec(id_params=(0.5,) * 8, pose=pose) for pose in POSES]
    metric = eval_pose([sprite_landmarks(s) for s in specs], POSES)
    assert metric.count == 3
    assert metric.skipped == 0
    for value in (metric.yaw, metric.pitch, metric.roll):
        assert value == pytest.approx(0.0, abs=1e-6)


def test_degenerate_landmarks_are_skipped() -> None:
    collapsed = np.full((5, 2), 32.0)
    metric = eval_pose([collapsed], [PoseCondition()])
    assert metric.count == 0
    assert metric.skipped == 1
    assert metric.yaw is None


def test_background_equality_rate() -> None:
    base = _sprites()[1].pixels
    mask = ellipse_mask().values
    same = eval_background([base.copy()], [base], [mask])
    assert same.rate == 1.0
    assert same.pixels == int((~mask).sum())
    assert not same.empty

    final = base.copy()
    final[0, 0, 1] ^= 0x01
    changed = eval_background([final], [base], [mask])
    assert changed.rate == pytest.approx((changed.pixels - 1) / changed.pixels)

    covered = eval_background([final], [base], [np.ones((64, 64), dtype=bool)])
    assert covered.empty
    assert covered.rate == 1.0


def test_identity_skips_empty_masks(network: DenseFaceNetwork) -> None:
    sample = _sprites()[0]
    images = [sample.pixels, sample.pixels]
    masks = [sample.annotations.hard_mask(), np.zeros((64, 64), dtype=bool)]
    params = np.stack([sample.spec.params, sample.spec.params])
    metric = eval_identity(images, masks, params, network)
    assert metric.count == 1
    assert metric.skipped == 1
    assert metric.mean is not None
    assert -1.0 <= metric.mean <= 1.0
    assert metric.std == 0.0
    assert metric.permuted_count == 0
    assert metric.permuted_mean is None


def test_identity_needs_encoder(make_config: Callable[..., TrainConfig]) -> None:
    sample = _sprites()[0]
    net = new_network(make_config())
    with pytest.raises(ConfigError):
        eval_identity([sample.pixels], [sample.annotations.hard_mask()], sample.spec.params, net)


def test_derangement_has_no_fixed_point() -> None:
    for count in range(2, 8):
        for seed in range(5):
            perm = derangement(count, np.random.default_rng(seed))
            assert sorted(perm.tolist()) == list(range(count))
            assert not np.any(perm == np.arange(count))
    with pytest.raises(DimensionError):
        derangement(1, np.random.default_rng(0))


def test_identity_permuted_baseline_sits_below_matched(
    network: DenseFaceNetwork, monkeypatch: pytest.MonkeyPatch
) -> None:
    sprites = _sprites()
    params = np.stack([s.spec.params for s in sprites])
    # an encoder that reproduces the oracle exactly
    monkeypatch.setattr(network, "embed_crops", lambda _crops: network.embed_identity(params))
    images = [s.pixels for s in sprites]
    masks = [s.annotations.hard_mask() for s in sprites]
    metric = eval_identity(images, masks, params, network, seed=3)
    assert metric.count == 3
    assert metric.mean == pytest.approx(1.0)
    assert metric.permuted_count == 3
    assert metric.permuted_mean is not None
    assert -1.0 <= metric.permuted_mean < metric.mean
    again = eval_identity(images, masks, params, network, seed=3)
    assert again.permuted_mean == metric.permuted_mean


@pytest.mark.slow
def test_trained_encoder_scores_clean_renders(
    make_config: Callable[..., TrainConfig], sprites: SpriteDataset
) -> None:
    """Clean renders of the training identities embed close to their oracle vectors.

    The calibration bar is pinned at 0.9 rather than 0.95: the encoder here is
    the tiny float64 one, trained for 400 steps on three identities.
    """
    config = make_config(
        phase="identity",
        steps=400,
        batch_size=4,
        learning_rate=3e-3,
        eval_interval=400,
        log_interval=100,
    )
    net = train_phase_identity(config, sprites, new_network(make_config())).network
    rows = sprites.indices("train").tolist()
    samples = [render(sprites.spec(i)) for i in rows]
    params = np.stack([s.spec.params for s in samples])
    metric = eval_identity(
        [s.pixels for s in samples], [s.annotations.hard_mask() for s in samples], params, net
    )
    assert metric.count == len(rows)
    assert metric.skipped == 0
    assert metric.mean is not None
    assert metric.permuted_mean is not None
    assert metric.std is not None
    assert 0.0 <= metric.std <= 1.0
    assert 0.9 <= metric.mean <= 1.0
    assert -1.0 <= metric.permuted_mean < metric.mean


def test_identical_annotations() -> None:
    anns = [s.annotations for s in _sprites()]
    metric = eval_annotations(anns, anns)
    assert metric.count == 3
    assert metric.mask_iou == 1.0
    assert metric.depth_mae == 0.0
    assert metric.landmark_px == 0.0

    blank = AnnotationSet(
        landmarks=np.zeros((5, 2)), mask=np.zeros((64, 64)), depth=np.zeros((64, 64))
    )
    empty = eval_annotations([blank], [blank])
    assert empty.mask_iou == 1.0
    assert empty.depth_mae is None


def test_diversity_pairs() -> None:
    dark = np.zeros((8, 8, 3), dtype=np.uint8)
    light = np.full((8, 8, 3), 51, dtype=np.uint8)
    metric = eval_diversity({0: [dark, light], 1: [dark]})
    assert metric.pairs == 1
    assert metric.groups == 1
    assert metric.mean == pytest.approx(0.2)
    assert eval_diversity({}).mean is None


def test_report_json_and_table() -> None:
    report = EvalReport(checkpoint_hash="ab" * 32, sample_count=2, steps=4)
    report.background.rate = 0.5
    assert EvalReport.model_validate_json(report.model_dump_json()) == report
    table = report.to_table()
    assert table.splitlines()[0] == f"checkpoint {'ab' * 8}  samples 2"
    assert "mask IoU" in table
    assert "n/a" in table
    assert "0.5000" in table
    assert len(report.rows()) == 14
    assert "identity cosine, permuted" in table


def test_pick_samples_prefers_heldout(sprites: SpriteDataset) -> None:
    assert pick_samples(sprites, 3) == [15, 16, 17]
    assert pick_samples(sprites, 7) == [15, 16, 17, 18, 19, 0, 1]


def test_evaluate_checkpoint_rejects_bad_input(
    make_config: Callable[..., TrainConfig], sprites: SpriteDataset, network: DenseFaceNetwork
) -> None:
    with pytest.raises(ConfigError):
        evaluate_checkpoint(network, sprites, EvalSettings(n=0))
    with pytest.raises(ConfigError):
        evaluate_checkpoint(new_network(make_config()), sprites, EvalSettings(n=1))


@pytest.mark.slow
def test_evaluate_checkpoint_end_to_end(
    network: DenseFaceNetwork, sprites: SpriteDataset
) -> None:
    settings = EvalSettings(n=1, steps=1, diversity_identities=1, diversity_seeds=2)
    report = evaluate_checkpoint(network, sprites, settings, content_hash="f" * 64)
    assert report.sample_count == 1
    assert report.background.rate == 1.0
    assert report.annotations.count == 1
    assert report.attributes.count == 1
    assert report.identity.count + report.identity.skipped == 1
    assert report.pose.count + report.pose.skipped == 1
    assert report.diversity.pairs == 1
