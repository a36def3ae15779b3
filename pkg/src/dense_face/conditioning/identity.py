"""Identity embeddings and the identity text embedding.

Two encoders produce unit-norm identity vectors ``c_id`` in the same space:

- ``IdentityOracle`` maps the eight sprite identity parameters through a
  fixed, seeded two-layer network. It plays the frozen face-recognition
  embedder and is stored with every checkpoint.
- ``IdentityImageEncoder`` is a small CNN over 32x32 face crops, trained to
  regress the oracle so identity can be measured on generated images.

``IdentityMLP`` lifts ``c_id`` into the text space and
``identity_text_embedding`` forms ``c' = lambda * MLP(c_id) + c_face``.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from dense_face.constants import Constants
from dense_face.exceptions import ConfigError, ContractError, DimensionError, DomainError
from dense_face.tensor_core import Conv2d, Linear, Module, Parameter, Tensor, ops


class IdentityOracle(Module):
    """Frozen analytic identity embedder.

    ``c_id = normalize(tanh(W2 tanh(W1 (2p - 1))))``. Parameters are centred
    on zero before the first layer so the hidden units use both signs of the
    tanh.
    """

    def __init__(
        self,
        *,
        seed: int = Constants.ORACLE_SEED,
        param_count: int = Constants.ID_PARAM_COUNT,
        hidden: int = Constants.ORACLE_HIDDEN,
        id_dim: int = Constants.ID_DIM,
        dtype: type[np.floating] = np.float32,
    ) -> None:
        super().__init__()
        rng = np.random.default_rng(seed)
        w1 = rng.standard_normal((param_count, hidden)) * (2.6 / math.sqrt(param_count))
        w2 = rng.standard_normal((hidden, id_dim)) * (1.7 / math.sqrt(hidden))
        self.w1 = Parameter(w1.astype(dtype), requires_grad=False)
        self.w2 = Parameter(w2.astype(dtype), requires_grad=False)

    @property
    def param_count(self) -> int:
        return self.w1.shape[0]

    def forward(self, id_params: np.ndarray) -> Tensor:
        """Embed ``[8]`` or ``[B, 8]`` identity parameters; returns ``[B, d]``.

        Raises:
            DomainError: If a parameter is outside [0, 1]
            DimensionError: If the trailing axis is not the parameter count
        """
        params = np.atleast_2d(np.asarray(id_params, dtype=np.float64))
        if params.ndim != 2 or params.shape[1] != self.param_count:
            msg = f"identity parameters must be [B, {self.param_count}], got {params.shape}"
            raise DimensionError(msg)
        if not np.isfinite(params).all() or (params < 0).any() or (params > 1).any():
            msg = "identity parameters must lie in [0, 1]"
            raise DomainError(msg)
        centred = Tensor(2.0 * params - 1.0, dtype=self.w1.dtype)
        hidden = ops.tanh(ops.matmul(centred, self.w1))
        return ops.l2_normalize(ops.tanh(ops.matmul(hidden, self.w2)), axis=-1)


def encode_identity_oracle(id_params: np.ndarray, oracle: IdentityOracle) -> Tensor:
    """Unit-norm ``c_id`` for identity parameters in [0, 1].

    The first layer sees the centred parameters ``2p - 1`` rather than ``p``:
    ``c_id = normalize(tanh(W2 tanh(W1 (2p - 1))))``.
    """
    return oracle.forward(id_params)


class IdentityImageEncoder(Module):
    """Three stride-2 convolutions and a linear read-out to a unit-norm ``[B, d]``."""

    def __init__(
        self,
        *,
        id_dim: int = Constants.ID_DIM,
        crop_size: int = Constants.ID_CROP_SIZE,
        width: int = 16,
        rng: np.random.Generator,
        dtype: type[np.floating] = np.float32,
    ) -> None:
        super().__init__()
        self.crop_size = crop_size
        self.conv1 = Conv2d(3, width, 3, rng=rng, stride=2, dtype=dtype)
        self.conv2 = Conv2d(width, 2 * width, 3, rng=rng, stride=2, dtype=dtype)
        self.conv3 = Conv2d(2 * width, 2 * width, 3, rng=rng, stride=2, dtype=dtype)
        side = crop_size // 8
        self.head = Linear(2 * width * side * side, id_dim, rng=rng, dtype=dtype)
        # nonzero bias keeps a blank crop away from the zero vector
        self.head.bias = Parameter((rng.standard_normal(id_dim) * 0.1).astype(dtype))

    def forward(self, crops: Tensor) -> Tensor:
        """Embed ``[3, S, S]`` or ``[B, 3, S, S]`` crops in ``[-1, 1]``.

        Raises:
            DimensionError: If the crop is not ``3 x crop_size x crop_size``
        """
        x = crops if crops.ndim == 4 else ops.reshape(crops, (1, *crops.shape))
        if x.ndim != 4 or x.shape[1:] != (3, self.crop_size, self.crop_size):
            side = self.crop_size
            msg = f"identity crops must be [B, 3, {side}, {side}], got {crops.shape}"
            raise DimensionError(msg)
        h = ops.silu(self.conv1.forward(x))
        h = ops.silu(self.conv2.forward(h))
        h = ops.silu(self.conv3.forward(h))
        flat = ops.reshape(h, (h.shape[0], int(np.prod(h.shape[1:]))))
        return ops.l2_normalize(self.head.forward(flat), axis=-1)


def encode_identity_image(crop: Tensor, encoder: IdentityImageEncoder) -> Tensor:
    return encoder.forward(crop)


class IdentityMLP(Module):
    """``d -> 2k -> k`` with SiLU between the two affine layers."""

    def __init__(
        self,
        *,
        id_dim: int = Constants.ID_DIM,
        text_dim: int = Constants.TEXT_DIM,
        rng: np.random.Generator,
        dtype: type[np.floating] = np.float32,
    ) -> None:
        super().__init__()
        self.fc1 = Linear(id_dim, 2 * text_dim, rng=rng, dtype=dtype)
        self.fc2 = Linear(2 * text_dim, text_dim, rng=rng, dtype=dtype)

    def forward(self, c_id: Tensor) -> Tensor:
        return self.fc2.forward(ops.silu(self.fc1.forward(c_id)))


@dataclass(frozen=True)
class IdentityTextEmbedding:
    """``c_prime = lam * delta + c_face`` with ``c_prime``/``delta`` of shape ``[B, k]``."""

    c_prime: Tensor
    lam: float
    delta: Tensor


def identity_text_embedding(
    c_id: Tensor, lam: float, mlp: IdentityMLP, face_embedding: Tensor
) -> IdentityTextEmbedding:
    """Offset the ``face`` word embedding by the scaled identity MLP output.

    Raises:
        ConfigError: If ``lam`` is negative
        ContractError: If the assembled vector deviates from its definition
    """
    if lam < 0 or not math.isfinite(lam):
        msg = f"identity scale lambda must be a finite value >= 0, got {lam}"
        raise ConfigError(msg)
    c = c_id if c_id.ndim == 2 else ops.reshape(c_id, (1, c_id.shape[0]))
    delta = mlp.forward(c)
    c_prime = ops.add(ops.scale(delta, lam), face_embedding)
    expected = lam * delta.data + face_embedding.data
    if np.max(np.abs(c_prime.data - expected)) > 1e-6 * (1.0 + np.max(np.abs(expected))):
        msg = "identity text embedding deviates from lambda * delta + c_face"
        raise ContractError(msg)
    return IdentityTextEmbedding(c_prime=c_prime, lam=float(lam), delta=delta)
