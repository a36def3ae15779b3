from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from dense_face.exceptions import (
    ContractError,
    DimensionError,
    NumericError,
    TapeStateError,
)
from dense_face.tensor_core import (
    Conv2d,
    GradTape,
    GroupNorm,
    Linear,
    Module,
    Tensor,
    backward,
    grad_check,
    grad_check_parameters,
    grad_enabled,
    no_grad,
    ops,
)

F64 = np.float64


def _rand(shape: tuple[int, ...], seed: int = 0) -> Tensor:
    return Tensor(np.random.default_rng(seed).standard_normal(shape), dtype=F64)


def test_square_gradient() -> None:
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True, dtype=F64)
    backward(ops.sum(ops.mul(x, x)))
    assert x.grad is not None
    np.testing.assert_allclose(x.grad, [2.0, 4.0, 6.0])


def test_gradients_accumulate_on_shared_leaf() -> None:
    x = Tensor([3.0], requires_grad=True, dtype=F64)
    y = ops.add(ops.mul(x, x), ops.scale(x, 2.0))
    backward(ops.sum(y))
    assert x.grad is not None
    np.testing.assert_allclose(x.grad, [8.0])


def test_backward_twice_raises() -> None:
    with GradTape():
        x = Tensor([1.0], requires_grad=True, dtype=F64)
        loss = ops.sum(ops.mul(x, x))
        backward(loss)
        with pytest.raises(TapeStateError):
            backward(loss)


def test_backward_requires_recorded_scalar() -> None:
    x = Tensor([1.0, 2.0], dtype=F64)
    with pytest.raises(ContractError):
        backward(ops.sum(x))
    y = Tensor([1.0, 2.0], requires_grad=True, dtype=F64)
    with pytest.raises(ContractError):
        backward(ops.mul(y, y))


def test_no_grad_is_thread_local() -> None:
    def probe() -> bool:
        return grad_enabled()

    with no_grad():
        assert not grad_enabled()
        with ThreadPoolExecutor(max_workers=1) as pool:
            assert pool.submit(probe).result()
    assert grad_enabled()


def test_no_grad_records_nothing() -> None:
    x = Tensor([1.0], requires_grad=True, dtype=F64)
    with no_grad():
        y = ops.mul(x, x)
    assert not y.requires_grad
    assert y.is_leaf


def test_construction_rejects_bad_input() -> None:
    with pytest.raises(NumericError):
        Tensor([np.nan])
    with pytest.raises(DimensionError):
        Tensor(np.zeros((0, 3)))
    with pytest.raises(ContractError):
        Tensor([1], dtype=np.int32)  # pyright: ignore[reportArgumentType]


def test_dtype_mismatch_and_shape_mismatch() -> None:
    a = Tensor([1.0], dtype=np.float32)
    b = Tensor([1.0], dtype=F64)
    with pytest.raises(ContractError):
        ops.add(a, b)
    with pytest.raises(DimensionError):
        ops.add(_rand((2, 3)), _rand((3, 2)))


def test_log_of_non_positive_raises() -> None:
    with pytest.raises(NumericError):
        ops.log(Tensor([0.0, 1.0], dtype=F64))


def test_softmax_masked_positions_get_zero() -> None:
    x = _rand((2, 4))
    mask = np.array([True, True, False, True])
    y = ops.softmax(x, axis=-1, mask=mask)
    np.testing.assert_allclose(y.data.sum(axis=-1), 1.0)
    assert (y.data[:, 2] == 0.0).all()
    with pytest.raises(ContractError):
        ops.softmax(x, mask=np.zeros(4, dtype=bool))


def test_bce_rejects_saturated_probabilities() -> None:
    with pytest.raises(NumericError):
        ops.bce(Tensor([1.0], dtype=F64), Tensor([1.0], dtype=F64))


@pytest.mark.parametrize(
    ("name", "fn", "shape"),
    [
        ("tanh", ops.tanh, (3, 4)),
        ("sigmoid", ops.sigmoid, (3, 4)),
        ("silu", ops.silu, (3, 4)),
        ("softmax", lambda x: ops.softmax(x, axis=-1), (2, 5)),
        ("l2_normalize", lambda x: ops.l2_normalize(x, axis=-1), (3, 4)),
        ("transpose", lambda x: ops.transpose(x, (1, 0)), (3, 4)),
        ("mean_axis", lambda x: ops.mean(x, axis=1), (3, 4)),
        ("avg_pool2", ops.avg_pool2, (1, 2, 4, 4)),
        ("upsample", ops.nearest_upsample2, (1, 2, 2, 2)),
        ("take", lambda x: ops.take(x, [0, 2, 2], axis=0), (3, 4)),
    ],
)
def test_unary_gradients(name: str, fn, shape: tuple[int, ...]) -> None:
    assert grad_check(fn, _rand(shape, seed=len(name))) < 1e-5


def test_matmul_gradient() -> None:
    w = _rand((4, 3), seed=1)
    assert grad_check(lambda x: ops.matmul(x, w), _rand((2, 5, 4))) < 1e-5


def test_conv2d_gradient() -> None:
    w = _rand((3, 2, 3, 3), seed=2)
    b = _rand((3,), seed=3)
    err = grad_check(lambda x: ops.conv2d(x, w, b, stride=1, pad=1), _rand((1, 2, 5, 5)))
    assert err < 1e-5
    strided = grad_check(lambda x: ops.conv2d(x, w, None, stride=2, pad=1), _rand((1, 2, 6, 6)))
    assert strided < 1e-5


def test_group_and_layer_norm_gradients() -> None:
    gamma = _rand((4,), seed=4)
    beta = _rand((4,), seed=5)
    assert grad_check(lambda x: ops.group_norm(x, 2, gamma, beta), _rand((2, 4, 3, 3))) < 1e-4
    assert grad_check(lambda x: ops.layer_norm(x, gamma, beta), _rand((3, 4))) < 1e-4


def test_losses_gradients() -> None:
    target = _rand((3, 4), seed=7)
    assert grad_check(lambda x: ops.mse(x, target), _rand((3, 4))) < 1e-5
    probs = Tensor(np.random.default_rng(8).uniform(0.1, 0.9, (3, 4)), dtype=F64)
    labels = Tensor((np.random.default_rng(9).random((3, 4)) > 0.5).astype(F64), dtype=F64)
    assert grad_check(lambda p: ops.bce(p, labels), probs) < 1e-5


def test_grad_check_requires_float64() -> None:
    with pytest.raises(ContractError):
        grad_check(ops.tanh, Tensor([1.0], dtype=np.float32))


class _Tiny(Module):
    def __init__(self) -> None:
        super().__init__()
        rng = np.random.default_rng(0)
        self.conv = Conv2d(2, 4, 3, rng=rng, dtype=F64)
        self.norm = GroupNorm(4, 2, dtype=F64)
        self.head = Linear(4, 1, rng=rng, dtype=F64)

    def forward(self, x: Tensor) -> Tensor:
        h = ops.silu(self.norm.forward(self.conv.forward(x)))
        pooled = ops.mean(ops.reshape(h, (h.shape[0], 4, -1)), axis=2)
        return self.head.forward(pooled)


def test_module_parameter_gradients() -> None:
    model = _Tiny()
    x = _rand((2, 2, 4, 4), seed=11)
    y = _rand((2, 1), seed=12)
    err = grad_check_parameters(
        lambda: ops.mse(model.forward(x), y), model.parameters(), max_checks=8
    )
    assert err < 1e-4


def test_state_dict_round_trip_and_freeze() -> None:
    a, b = _Tiny(), _Tiny()
    for p in b.parameters():
        p.data = p.data + 1.0
    b.load_state_dict(a.state_dict())
    for (name, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters(), strict=True):
        np.testing.assert_array_equal(pa.data, pb.data, err_msg=name)
    a.freeze()
    assert a.trainable_parameters() == []
    state = a.state_dict()
    state.pop(next(iter(state)))
    with pytest.raises(ContractError):
        b.load_state_dict(state)
