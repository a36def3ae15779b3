from __future__ import annotations

import numpy as np
import pytest

from dense_face.attention import (
    AdapterWeights,
    CrossAttentionWeights,
    SelfAttention,
    adapted_cross_attention,
    attention_activations,
    cross_attention,
    mode_dispatch,
)
from dense_face.conditioning import ConditionBundle
from dense_face.constants import GenerationMode
from dense_face.exceptions import ConfigError, DimensionError
from dense_face.tensor_core import Tensor, grad_check

F64 = np.float64
L = 6


def _site() -> CrossAttentionWeights:
    return CrossAttentionWeights(8, 12, 2, 4, rng=np.random.default_rng(0), dtype=F64)


def _bundle(mode: GenerationMode, seed: int = 1) -> ConditionBundle:
    rng = np.random.default_rng(seed)
    tokens = Tensor(rng.standard_normal((2, L + 2, 12)), dtype=F64)
    mask = np.ones((2, L + 2), dtype=bool)
    mask[:, L - 2 : L] = False
    if mode is GenerationMode.TEXT_EDITING:
        mask[:, L:] = False
    return ConditionBundle(tokens=tokens, mask=mask, mode=mode, text_length=L)


def _features(seed: int = 2) -> Tensor:
    return Tensor(np.random.default_rng(seed).standard_normal((2, 5, 8)), dtype=F64)


def test_zero_adapter_matches_base() -> None:
    w = _site()
    a = AdapterWeights(w)
    cond = _bundle(GenerationMode.FACE_GENERATION)
    f = _features()
    np.testing.assert_array_equal(
        adapted_cross_attention(f, cond, w, a).data, cross_attention(f, cond, w).data
    )


def test_masked_keys_get_zero_weight() -> None:
    cond = _bundle(GenerationMode.FACE_GENERATION)
    acts = attention_activations(_features(), cond, _site())
    assert acts.weights.shape == (2, 2, 5, L + 2)
    np.testing.assert_array_equal(acts.weights.data[..., L - 2 : L], 0.0)
    np.testing.assert_allclose(acts.weights.data.sum(axis=-1), 1.0)


def test_text_mode_ignores_identity_and_pose_slots() -> None:
    w = _site()
    a = AdapterWeights(w)
    a.w_k_prime.data = np.full(a.w_k_prime.shape, 0.3)
    cond = _bundle(GenerationMode.TEXT_EDITING)
    f = _features()
    base = mode_dispatch(GenerationMode.TEXT_EDITING, f, cond, w, a).data
    altered = cond.tokens.data.copy()
    altered[:, L:] = 99.0
    cond2 = ConditionBundle(
        tokens=Tensor(altered, dtype=F64), mask=cond.mask, mode=cond.mode, text_length=L
    )
    np.testing.assert_array_equal(
        mode_dispatch(GenerationMode.TEXT_EDITING, f, cond2, w, a).data, base
    )
    np.testing.assert_array_equal(base, cross_attention(f, cond, w).data)


def test_face_mode_needs_adapter() -> None:
    with pytest.raises(ConfigError):
        mode_dispatch(
            GenerationMode.FACE_GENERATION,
            _features(),
            _bundle(GenerationMode.FACE_GENERATION),
            _site(),
        )


def test_width_mismatch() -> None:
    bad = Tensor(np.zeros((2, 5, 7)), dtype=F64)
    with pytest.raises(DimensionError):
        cross_attention(bad, _bundle(GenerationMode.FACE_GENERATION), _site())


def test_adapter_gradients_flow() -> None:
    w = _site()
    a = AdapterWeights(w)
    cond = _bundle(GenerationMode.FACE_GENERATION)

    def through_adapter(wq: Tensor) -> Tensor:
        a.w_q_prime = wq  # pyright: ignore[reportAttributeAccessIssue]
        return adapted_cross_attention(_features(), cond, w, a)

    start = Tensor(np.random.default_rng(3).standard_normal(w.w_q.shape) * 0.1, dtype=F64)
    assert grad_check(through_adapter, start, max_checks=12) < 1e-5


def test_self_attention_gradient() -> None:
    attn = SelfAttention(8, 2, 4, rng=np.random.default_rng(4), dtype=F64)
    mask = np.array([[True, True, True, False, False]] * 2)
    assert grad_check(lambda x: attn.forward(x, mask), _features(5), max_checks=20) < 1e-5
