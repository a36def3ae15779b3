from __future__ import annotations

from collections.abc import Callable

import numpy as np
import pytest

from dense_face.annotations import AnnotationSet
from dense_face.conditioning import PoseCondition
from dense_face.constants import GenerationMode, TrainPhase
from dense_face.dense_heads import gaussian_heatmaps, predict_annotations, soft_argmax
from dense_face.exceptions import ConfigError, ContractError, TimestepRangeError
from dense_face.models import TrainConfig
from dense_face.network import DenseFaceNetwork, group_of
from dense_face.tensor_core import Tensor, no_grad
from dense_face.training import new_network
from dense_face.unet import UNetConfig

CAPTION = "a face with black hair and blue eyes looking left on a gray background"
POSE = [PoseCondition(20.0, -10.0, 5.0)]


def _noise(seed: int = 0) -> Tensor:
    return Tensor(np.random.default_rng(seed).standard_normal((1, 3, 64, 64)), dtype=np.float64)


def _text_eps(net: DenseFaceNetwork, x: Tensor) -> np.ndarray:
    mode = GenerationMode.TEXT_EDITING
    with no_grad():
        cond = net.condition(net.encode_captions([CAPTION]), mode)
        eps, _ = net.denoise(x, 7, cond, mode)
    return eps.data


def _face_eps(
    net: DenseFaceNetwork, x: Tensor, *, use_pose_branch: bool | None = None
) -> tuple[np.ndarray, list[AnnotationSet]]:
    mode = GenerationMode.FACE_GENERATION
    with no_grad():
        c_id = net.embed_identity(np.full((1, 8), 0.4))
        cond = net.condition(net.encode_captions([CAPTION]), mode, c_id, POSE)
        eps, feats = net.denoise(x, 7, cond, mode, POSE, use_pose_branch=use_pose_branch)
        return eps.data, net.annotate(feats)


def test_initialization_is_seeded(make_config: Callable[..., TrainConfig]) -> None:
    a = new_network(make_config()).state_dict()
    b = new_network(make_config()).state_dict()
    c = new_network(make_config(seed=1)).state_dict()
    assert a.keys() == b.keys()
    for name in a:
        np.testing.assert_array_equal(a[name], b[name], err_msg=name)
    assert any(not np.array_equal(a[n], c[n]) for n in a if n.startswith("unet."))


def test_attaching_adapters_leaves_text_editing_unchanged(
    make_config: Callable[..., TrainConfig],
) -> None:
    net = new_network(make_config())
    x = _noise()
    before = _text_eps(net, x)
    net.attach_adapter_group()
    net.attach_identity_encoder()
    np.testing.assert_array_equal(_text_eps(net, x), before)
    assert net.groups() == ["base", "adapter", "identity"]


def test_face_generation_needs_adapter_group(make_config: Callable[..., TrainConfig]) -> None:
    net = new_network(make_config())
    mode = GenerationMode.FACE_GENERATION
    with no_grad():
        text = net.encode_captions([CAPTION])
        with pytest.raises(ConfigError):
            net.condition(text, mode, net.embed_identity(np.full((1, 8), 0.4)), POSE)
        with pytest.raises(ConfigError):
            net.condition(text, mode)


def test_face_generation_annotations(network: DenseFaceNetwork) -> None:
    eps, annotations = _face_eps(network, _noise())
    assert eps.shape == (1, 3, 64, 64)
    assert np.isfinite(eps).all()
    (ann,) = annotations
    assert ann.landmarks.shape == (5, 2)
    assert ann.mask.shape == ann.depth.shape == (64, 64)
    ann.validate()


def test_text_features_have_no_annotations(network: DenseFaceNetwork) -> None:
    mode = GenerationMode.TEXT_EDITING
    with no_grad():
        cond = network.condition(network.encode_captions([CAPTION]), mode)
        _, feats = network.denoise(_noise(), 3, cond, mode)
    heads = network.dense_heads
    assert heads is not None
    with pytest.raises(ContractError):
        predict_annotations(feats, heads)


def test_zero_injection_disables_pose_branch(make_config: Callable[..., TrainConfig]) -> None:
    net = new_network(make_config(zero_init_injection=True))
    net.attach_adapter_group()
    x = _noise(1)
    with_branch, _ = _face_eps(net, x)
    without, _ = _face_eps(net, x, use_pose_branch=False)
    np.testing.assert_array_equal(with_branch, without)


def test_pose_branch_starts_as_encoder_copy(network: DenseFaceNetwork) -> None:
    branch = network.pose_branch
    assert branch is not None
    copied = dict(branch.encoder.named_parameters())
    for name, param in network.unet.encoder.named_parameters():
        np.testing.assert_array_equal(copied[name].data, param.data, err_msg=name)
        assert copied[name] is not param


def test_timestep_outside_schedule(network: DenseFaceNetwork) -> None:
    mode = GenerationMode.TEXT_EDITING
    with no_grad():
        cond = network.condition(network.encode_captions([""]), mode)
        with pytest.raises(TimestepRangeError):
            network.denoise(_noise(), 50, cond, mode)


def test_weight_groups_and_phase_freezing(network: DenseFaceNetwork) -> None:
    assert group_of("unet.conv_out.weight") == "base"
    assert group_of("dense_heads.mask.conv.weight") == "adapter"
    assert group_of("identity_encoder.head.weight") == "identity"
    with pytest.raises(ContractError):
        group_of("optimizer.m.unet")
    trainable = network.prepare_phase(TrainPhase.ADAPTER)
    assert trainable
    assert {group_of(name) for name, _ in trainable} == {"adapter"}
    assert all(not p.requires_grad for _, p in network.group_parameters("base"))
    identity = network.prepare_phase(TrainPhase.IDENTITY)
    assert {group_of(name) for name, _ in identity} == {"identity"}


def test_reconfigure_rejects_size_changes(
    network: DenseFaceNetwork, make_config: Callable[..., TrainConfig]
) -> None:
    wider = new_network(make_config(text_dim=32)).config
    with pytest.raises(ConfigError):
        network.reconfigure(wider)
    network.reconfigure(network.config.with_overrides(lambda_id=0.5))
    assert network.config.conditioning.lambda_id == 0.5
    with pytest.raises(ConfigError):
        network.reconfigure(network.config.with_overrides(pose_branch_middle=False))


def test_unet_config_validation() -> None:
    with pytest.raises(ConfigError):
        UNetConfig(base_channels=6, groups=4)
    with pytest.raises(ConfigError):
        UNetConfig(image_size=30, channel_mults=(1, 2, 2))
    with pytest.raises(ConfigError):
        UNetConfig(time_dim=15)


def test_soft_argmax_recovers_heatmap_centres() -> None:
    points = np.array([[10.0, 20.0], [40.0, 12.0], [32.0, 32.0], [20.0, 50.0], [44.0, 50.0]])
    maps = gaussian_heatmaps(points, 32, 64, sigma=1.0)
    assert maps.shape == (5, 32, 32)
    np.testing.assert_allclose(soft_argmax(maps, 64), points, atol=1e-3)
