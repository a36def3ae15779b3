from __future__ import annotations

import numpy as np
import pytest

from dense_face.conditioning import (
    FACE,
    IdentityImageEncoder,
    IdentityMLP,
    IdentityOracle,
    PoseCondition,
    PoseProjection,
    TextEncoder,
    Vocabulary,
    build_condition,
    detokenize,
    encode_identity_oracle,
    identity_text_embedding,
    pose_images,
    pose_token,
    tokenize,
    tokenize_batch,
)
from dense_face.constants import GenerationMode
from dense_face.exceptions import (
    ConfigError,
    DimensionError,
    DomainError,
    TokenizationError,
)
from dense_face.tensor_core import Tensor

F64 = np.float64
WORDS = "a face with black hair and blue eyes looking left on gray background".split()


@pytest.fixture
def vocab() -> Vocabulary:
    return Vocabulary.from_words(WORDS)


@pytest.fixture
def encoder(vocab: Vocabulary) -> TextEncoder:
    return TextEncoder(
        len(vocab),
        dim=8,
        length=16,
        layers=1,
        heads=2,
        head_dim=4,
        rng=np.random.default_rng(0),
        dtype=F64,
    )


def test_vocabulary_layout(vocab: Vocabulary) -> None:
    assert vocab.tokens[:3] == ("<pad>", "<bos>", "<eos>")
    assert FACE in vocab
    assert Vocabulary.parse(vocab.serialize()) == vocab
    with pytest.raises(ConfigError):
        Vocabulary(["<pad>", "<bos>", "<eos>", "hair"])
    with pytest.raises(ConfigError):
        Vocabulary(["<bos>", "<pad>", "<eos>", "face"])


def test_tokenize_round_trip(vocab: Vocabulary) -> None:
    caption = "a face with black hair and blue eyes looking left on a gray background"
    ids = tokenize(caption, vocab, 16)
    assert ids.shape == (16,)
    assert ids[0] == vocab.bos_id
    assert detokenize(ids, vocab) == caption
    assert tokenize("", vocab, 4).tolist() == [1, 2, 0, 0]


def test_tokenize_errors(vocab: Vocabulary) -> None:
    with pytest.raises(TokenizationError):
        tokenize("a purple face", vocab)
    with pytest.raises(TokenizationError):
        tokenize("a face with black hair", vocab, 5)


def test_pose_condition_domain() -> None:
    pose = PoseCondition.parse("10, -20, 45")
    np.testing.assert_array_equal(pose.as_array(), [10.0, -20.0, 45.0])
    for bad in ("46,0,0", "0,-45.5,0", "1,2", "a,b,c", "nan,0,0"):
        with pytest.raises(DomainError):
            PoseCondition.parse(bad)


def test_pose_images_are_constant_channels() -> None:
    img = pose_images([PoseCondition(45, -22.5, 0)], size=4, dtype=F64)
    assert img.shape == (1, 3, 4, 4)
    np.testing.assert_allclose(img.data[0, 0], 1.0)
    np.testing.assert_allclose(img.data[0, 1], -0.5)
    np.testing.assert_allclose(img.data[0, 2], 0.0)


def test_zero_pose_token_is_bias() -> None:
    proj = PoseProjection(text_dim=8, rng=np.random.default_rng(1), dtype=F64)
    assert proj.proj.bias is not None
    np.testing.assert_allclose(pose_token(PoseCondition(), proj).data, proj.proj.bias.data)


def test_oracle_is_unit_norm_and_seeded() -> None:
    params = np.random.default_rng(2).random((4, 8))
    a = IdentityOracle(dtype=F64).forward(params).data
    b = IdentityOracle(dtype=F64).forward(params).data
    np.testing.assert_allclose(np.linalg.norm(a, axis=1), 1.0)
    np.testing.assert_array_equal(a, b)
    with pytest.raises(DomainError):
        IdentityOracle().forward(np.full(8, 1.5))
    with pytest.raises(DimensionError):
        IdentityOracle().forward(np.zeros(7))


def test_oracle_first_layer_sees_centred_params() -> None:
    oracle = IdentityOracle(dtype=F64)
    params = np.random.default_rng(5).random((3, 8))
    hidden = np.tanh((2.0 * params - 1.0) @ oracle.w1.data)
    out = np.tanh(hidden @ oracle.w2.data)
    expected = out / np.linalg.norm(out, axis=1, keepdims=True)
    np.testing.assert_allclose(encode_identity_oracle(params, oracle).data, expected, atol=1e-12)


def test_image_encoder_unit_norm() -> None:
    enc = IdentityImageEncoder(crop_size=16, width=4, rng=np.random.default_rng(3), dtype=F64)
    crops = Tensor(np.zeros((2, 3, 16, 16)), dtype=F64)
    out = enc.forward(crops).data
    assert out.shape == (2, 32)
    np.testing.assert_allclose(np.linalg.norm(out, axis=1), 1.0)
    with pytest.raises(DimensionError):
        enc.forward(Tensor(np.zeros((1, 3, 8, 8)), dtype=F64))


def test_identity_text_embedding(vocab: Vocabulary, encoder: TextEncoder) -> None:
    mlp = IdentityMLP(id_dim=32, text_dim=8, rng=np.random.default_rng(4), dtype=F64)
    c_id = IdentityOracle(dtype=F64).forward(np.full((1, 8), 0.5))
    face = encoder.face_embedding(vocab)
    zero = identity_text_embedding(c_id, 0.0, mlp, face)
    np.testing.assert_allclose(zero.c_prime.data[0], face.data)
    full = identity_text_embedding(c_id, 0.3, mlp, face)
    np.testing.assert_allclose(full.c_prime.data, 0.3 * full.delta.data + face.data)
    with pytest.raises(ConfigError):
        identity_text_embedding(c_id, -0.1, mlp, face)


def test_condition_mask_by_mode(vocab: Vocabulary, encoder: TextEncoder) -> None:
    ids = tokenize_batch(["a face with black hair", ""], vocab, 16)
    text = encoder.forward(ids)
    assert text.tokens.shape == (2, 16, 8)
    np.testing.assert_array_equal(text.mask[0, :7], True)
    np.testing.assert_array_equal(text.mask[0, 7:], False)

    plain = build_condition(text, GenerationMode.TEXT_EDITING)
    assert plain.tokens.shape == (2, 18, 8)
    assert not plain.mask[:, 16:].any()
    np.testing.assert_array_equal(plain.tokens.data[:, 16:], 0.0)

    mlp = IdentityMLP(id_dim=32, text_dim=8, rng=np.random.default_rng(5), dtype=F64)
    c_id = IdentityOracle(dtype=F64).forward(np.full((2, 8), 0.25))
    idtext = identity_text_embedding(c_id, 0.01, mlp, encoder.face_embedding(vocab))
    no_pose = build_condition(text, GenerationMode.FACE_GENERATION, idtext)
    assert no_pose.mask[:, 16].all()
    assert not no_pose.mask[:, 17].any()
    proj = PoseProjection(text_dim=8, rng=np.random.default_rng(6), dtype=F64)
    tok = proj.forward([PoseCondition(), PoseCondition(10, 0, 0)])
    posed = build_condition(text, GenerationMode.FACE_GENERATION, idtext, tok)
    assert posed.mask[:, 16:].all()
    np.testing.assert_array_equal(posed.text_mask()[:, 16:], False)
    with pytest.raises(ConfigError):
        build_condition(text, GenerationMode.FACE_GENERATION)
