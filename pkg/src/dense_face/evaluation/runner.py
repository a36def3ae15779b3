"""End-to-end evaluation of a checkpoint against a sprite dataset.

For each evaluated sample (held-out identities first) the personalized
pipeline is asked for the sample's caption, identity and pose with the
predicted blend mask. Identity, pose, attribute and annotation metrics use
the final image and its predicted annotations; background preservation
compares final and base under the blend mask. Diversity comes from extra
face-generation runs of a few identities under neighbouring seeds.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from fastmcp.utilities.logging import get_logger
import numpy as np
from tqdm import tqdm

from dense_face.annotations import AnnotationSet
from dense_face.constants import Constants, MaskSource
from dense_face.exceptions import ConfigError
from dense_face.network import DenseFaceNetwork
from dense_face.pipeline import GenerationPipeline, GenerationRequest, GenerationResult
from dense_face.synthfaces import SpriteDataset

from .metrics import (
    eval_annotations,
    eval_attributes,
    eval_background,
    eval_diversity,
    eval_identity,
    eval_pose,
)
from .models import EvalReport, IdentityMetric

_logger = get_logger(__name__)


@dataclass(frozen=True)
class EvalSettings:
    """Knobs of one evaluation run."""

    n: int = 16
    seed: int = 0
    steps: int = Constants.INFERENCE_STEPS
    guidance: float = Constants.GUIDANCE_SCALE
    diversity_identities: int = 4
    diversity_seeds: int = 2
    workers: int = 1


def pick_samples(dataset: SpriteDataset, n: int) -> list[int]:
    """First ``n`` held-out samples, topped up with training samples."""
    heldout = dataset.indices("heldout").tolist()
    train = dataset.indices("train").tolist()
    return [*heldout, *train][:n]


def _request(dataset: SpriteDataset, index: int, settings: EvalSettings) -> GenerationRequest:
    entry = dataset.entries[index]
    yaw, pitch, roll = entry.pose
    return GenerationRequest(
        mode="personalized",
        caption=entry.caption,
        id_params=list(entry.id_params),
        pose=(yaw, pitch, roll),
        seed=settings.seed + index,
        steps=settings.steps,
        guidance=settings.guidance,
        mask=MaskSource.PREDICTED,
    )


def _annotations(result: GenerationResult) -> AnnotationSet:
    if result.annotations is None:
        msg = "face generation returned no annotations"
        raise ConfigError(msg)
    return result.annotations


def evaluate_checkpoint(
    network: DenseFaceNetwork,
    dataset: SpriteDataset,
    settings: EvalSettings,
    *,
    content_hash: str = "",
    progress: bool = False,
) -> EvalReport:
    """Generate for ``settings.n`` dataset samples and compute every metric.

    The identity metric needs the identity encoder; without it that block
    stays empty and a warning is logged.

    Raises:
        ConfigError: If ``n`` is not positive or the checkpoint lacks the
            adapter group
    """
    if settings.n < 1:
        msg = f"evaluation needs n >= 1, got {settings.n}"
        raise ConfigError(msg)
    if not network.has_adapter_group:
        msg = "evaluation needs a checkpoint with the adapter group"
        raise ConfigError(msg)
    pipeline = GenerationPipeline(network)
    rows = pick_samples(dataset, settings.n)
    requests = [_request(dataset, i, settings) for i in rows]
    _logger.info(
        "Evaluating %d samples (steps=%d, seed=%d)", len(rows), settings.steps, settings.seed
    )
    with ThreadPoolExecutor(max_workers=max(1, settings.workers)) as pool:
        results = list(
            tqdm(
                pool.map(pipeline.personalized_generate, requests),
                total=len(requests),
                desc="eval",
                disable=not progress,
                leave=False,
            )
        )

    finals = [r.image for r in results]
    preds = [_annotations(r) for r in results]
    captions = [req.caption for req in requests]
    poses = [req.pose_condition for req in requests]
    params = np.array([dataset.entries[i].id_params for i in rows], dtype=np.float64)

    if network.has_identity_encoder:
        identity = eval_identity(
            finals, [a.hard_mask() for a in preds], params, network, seed=settings.seed
        )
    else:
        _logger.warning("Checkpoint has no identity encoder; identity metric left empty")
        identity = IdentityMetric()

    report = EvalReport(
        checkpoint_hash=content_hash,
        sample_count=len(rows),
        seed=settings.seed,
        steps=settings.steps,
        identity=identity,
        pose=eval_pose([a.landmarks for a in preds], poses),
        background=eval_background(
            finals,
            [_base(r) for r in results],
            [_mask(r) for r in results],
        ),
        attributes=eval_attributes(finals, captions, preds),
        annotations=eval_annotations(preds, [dataset.annotations[i] for i in rows]),
        diversity=eval_diversity(_diversity_groups(pipeline, dataset, rows, settings)),
    )
    _logger.info("Evaluation finished: %d samples", report.sample_count)
    return report


def _base(result: GenerationResult) -> np.ndarray:
    if result.base is None:
        msg = "personalized generation returned no base image"
        raise ConfigError(msg)
    return result.base


def _mask(result: GenerationResult) -> np.ndarray:
    if result.mask is None:
        msg = "personalized generation returned no blend mask"
        raise ConfigError(msg)
    return result.mask.values


def _diversity_groups(
    pipeline: GenerationPipeline,
    dataset: SpriteDataset,
    rows: list[int],
    settings: EvalSettings,
) -> dict[int, list[np.ndarray]]:
    groups: dict[int, list[np.ndarray]] = {}
    seen: list[int] = []
    for index in rows:
        identity = dataset.entries[index].identity
        if identity in seen or len(seen) >= settings.diversity_identities:
            continue
        seen.append(identity)
        entry = dataset.entries[index]
        images = []
        for k in range(settings.diversity_seeds):
            req = GenerationRequest(
                mode="face",
                caption=entry.caption,
                id_params=list(entry.id_params),
                pose=(0.0, 0.0, 0.0),
                seed=settings.seed + 7919 * (k + 1) + index,
                steps=settings.steps,
                guidance=settings.guidance,
            )
            images.append(pipeline.generate_face(req).image)
        groups[identity] = images
    return groups
