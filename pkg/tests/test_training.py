from __future__ import annotations

from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest

from dense_face.constants import TrainPhase
from dense_face.exceptions import ConfigError
from dense_face.models import TrainConfig
from dense_face.network import DenseFaceNetwork
from dense_face.services import ModelService
from dense_face.synthfaces import SpriteDataset
from dense_face.tensor_core import Parameter, Tensor
from dense_face.training import (
    Adam,
    ResumePoint,
    Trainer,
    TrainingState,
    TrainingStatus,
    annotated_rows,
    cosine_distance_loss,
    new_network,
    train_phase_adapter,
    train_phase_base,
    train_phase_identity,
)


def _weights(net: DenseFaceNetwork, group: str) -> dict[str, np.ndarray]:
    return {name: p.data.copy() for name, p in net.group_parameters(group)}


def _assert_same(a: dict[str, np.ndarray], b: dict[str, np.ndarray]) -> None:
    assert a.keys() == b.keys()
    for name in a:
        np.testing.assert_array_equal(a[name], b[name], err_msg=name)


def test_adam_moves_against_the_gradient() -> None:
    p = Parameter(np.array([1.0, -2.0]))
    opt = Adam([("p", p)], lr=0.1)
    p.grad = np.array([0.5, -0.5])
    opt.step()
    np.testing.assert_allclose(p.data, [0.9, -1.9])
    state = opt.state_tensors()
    assert set(state) == {"optimizer.m.p", "optimizer.v.p"}
    with pytest.raises(ConfigError):
        Adam([("p", p)], lr=0.0)


def test_cosine_distance_of_identical_rows_is_zero() -> None:
    rows = np.eye(3)
    same = Tensor(rows)
    assert cosine_distance_loss(same, Tensor(rows)).item() == pytest.approx(0.0)
    flipped = cosine_distance_loss(Tensor(rows), Tensor(-rows))
    assert flipped.item() == pytest.approx(2.0)


def test_annotation_gate() -> None:
    assert annotated_rows(np.array([0, 10, 11, 49]), 50, 0.2).tolist() == [0, 1]


def test_base_phase_records_progress(
    make_config: Callable[..., TrainConfig], sprites: SpriteDataset
) -> None:
    result = train_phase_base(make_config(), sprites)
    state = result.state
    assert state.phase is TrainPhase.BASE
    assert state.status is TrainingStatus.COMPLETED
    assert state.step == 2
    assert len(state.loss_history) == 2
    assert all(np.isfinite(state.loss_history))
    assert [s for s, _ in state.heldout_history] == [1, 2]
    assert result.optimizer.step_count == 2
    assert result.network.groups() == ["base"]


def test_phase_mismatch_is_rejected(
    make_config: Callable[..., TrainConfig], sprites: SpriteDataset
) -> None:
    with pytest.raises(ConfigError):
        train_phase_base(make_config(phase="adapter"), sprites)
    net = new_network(make_config())
    wrong = ResumePoint(optimizer_tensors={}, state=TrainingState(phase=TrainPhase.ADAPTER))
    with pytest.raises(ConfigError):
        Trainer(net, sprites, make_config(), resume=wrong)
    with pytest.raises(ConfigError):
        net.prepare_phase(TrainPhase.IDENTITY)


def test_training_is_reproducible(
    make_config: Callable[..., TrainConfig], sprites: SpriteDataset, tmp_path: Path
) -> None:
    first = train_phase_base(make_config(steps=1), sprites)
    second = train_phase_base(make_config(steps=1), sprites)
    hash_a = ModelService.save(tmp_path / "a.dfck", first.network, first)
    hash_b = ModelService.save(tmp_path / "b.dfck", second.network, second)
    assert hash_a == hash_b
    assert (tmp_path / "a.dfck").read_bytes() == (tmp_path / "b.dfck").read_bytes()


@pytest.mark.slow
def test_resume_matches_uninterrupted_run(
    make_config: Callable[..., TrainConfig], sprites: SpriteDataset, tmp_path: Path
) -> None:
    full = train_phase_base(make_config(steps=3), sprites)

    partial = train_phase_base(make_config(steps=1), sprites)
    path = tmp_path / "partial.dfck"
    ModelService.save(path, partial.network, partial)
    loaded = ModelService.load(path)
    resume = loaded.resume_point(TrainPhase.BASE)
    assert resume is not None
    assert resume.state.step == 1
    assert loaded.resume_point(TrainPhase.ADAPTER) is None

    resumed = train_phase_base(
        make_config(steps=3), sprites, network=loaded.network, resume=resume
    )
    assert resumed.state.step == 3
    assert resumed.optimizer.step_count == 3
    np.testing.assert_allclose(resumed.state.loss_history, full.state.loss_history)
    _assert_same(_weights(resumed.network, "base"), _weights(full.network, "base"))


@pytest.mark.slow
def test_adapter_and_identity_phases_leave_base_frozen(
    make_config: Callable[..., TrainConfig], sprites: SpriteDataset
) -> None:
    base = train_phase_base(make_config(steps=1), sprites).network
    frozen = _weights(base, "base")

    adapter = train_phase_adapter(
        make_config(phase="adapter", annotation_t_fraction=1.0), sprites, base
    )
    net = adapter.network
    assert net.groups() == ["base", "adapter"]
    assert all(np.isfinite(adapter.state.loss_history))
    _assert_same(_weights(net, "base"), frozen)
    moved = _weights(net, "adapter")

    identity = train_phase_identity(make_config(phase="identity"), sprites, net)
    assert identity.network.groups() == ["base", "adapter", "identity"]
    assert all(0.0 <= loss <= 2.0 for loss in identity.state.loss_history)
    _assert_same(_weights(net, "base"), frozen)
    _assert_same(_weights(net, "adapter"), moved)


@pytest.mark.slow
def test_long_adapter_run_keeps_base_bit_identical(
    make_config: Callable[..., TrainConfig], sprites: SpriteDataset
) -> None:
    """Every base tensor is bit-identical after 200 adapter steps.

    The step count is pinned below a full phase to keep the suite on a desk
    budget. The optimizer is also checked to hold no base tensor at all, so
    there are no Adam moments that could move one on any later step.
    """
    base = train_phase_base(make_config(steps=1), sprites).network
    frozen = _weights(base, "base")
    config = make_config(
        phase="adapter",
        steps=200,
        batch_size=1,
        eval_interval=200,
        log_interval=50,
        annotation_t_fraction=1.0,
    )
    result = train_phase_adapter(config, sprites, base)
    net = result.network
    assert result.state.step == 200
    assert result.optimizer.step_count == 200
    assert all(np.isfinite(result.state.loss_history))

    base_params = net.group_parameters("base")
    trained = {id(p) for p in result.optimizer.params.values()}
    assert not trained & {id(p) for _, p in base_params}
    assert not set(result.optimizer.params) & {name for name, _ in base_params}
    assert not any(p.requires_grad for _, p in base_params)
    _assert_same(_weights(net, "base"), frozen)

    moved = _weights(net, "adapter")
    assert moved
    assert set(result.optimizer.params) <= set(moved)
