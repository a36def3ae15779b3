from __future__ import annotations

from collections.abc import Callable
from pathlib import Path
import sys
from typing import Any

import pytest


def _ensure_src_on_path() -> None:
    root = Path(__file__).resolve().parents[1]
    src = root / "src"
    if str(src) not in sys.path:
        sys.path.insert(0, str(src))


_ensure_src_on_path()

from dense_face.models import TrainConfig  # noqa: E402
from dense_face.network import DenseFaceNetwork  # noqa: E402
from dense_face.synthfaces import SpriteDataset, generate_dataset, load_dataset  # noqa: E402
from dense_face.training import new_network  # noqa: E402

TINY_MODEL: dict[str, Any] = {
    "image_size": 64,
    "base_channels": 8,
    "channel_mults": [1, 2],
    "blocks_per_level": 1,
    "heads": 2,
    "head_dim": 4,
    "groups": 4,
    "time_dim": 16,
    "text_dim": 16,
    "id_dim": 8,
    "text_layers": 1,
    "max_tokens": 16,
    "timesteps": 50,
    "dtype": "float64",
}

TINY_LOOP: dict[str, Any] = {
    "steps": 2,
    "batch_size": 2,
    "eval_interval": 1,
    "log_interval": 1,
    "heldout_batch": 2,
}

SPRITE_COUNT = 20
POSES_PER_IDENTITY = 5


@pytest.fixture
def make_config() -> Callable[..., TrainConfig]:
    """Factory for small float64 training configs; keyword arguments override."""

    def build(**overrides: Any) -> TrainConfig:
        return TrainConfig(**{**TINY_MODEL, **TINY_LOOP, **overrides})

    return build


@pytest.fixture(scope="session")
def sprite_root(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """Four identities of five sprites; identity 3 (samples 15-19) is held out."""
    root = tmp_path_factory.mktemp("sprites")
    generate_dataset(SPRITE_COUNT, 7, root, poses_per_identity=POSES_PER_IDENTITY)
    return root


@pytest.fixture(scope="session")
def sprites(sprite_root: Path) -> SpriteDataset:
    return load_dataset(sprite_root)


@pytest.fixture
def network(make_config: Callable[..., TrainConfig]) -> DenseFaceNetwork:
    """Untrained network with every weight group attached."""
    net = new_network(make_config())
    net.attach_adapter_group()
    net.attach_identity_encoder()
    return net
