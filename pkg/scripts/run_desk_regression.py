"""Desk-scale end-to-end regression.

Chains every stage on the CPU and checks the calibrated bars:
 - synth     → render the sprite dataset
 - train     → base, adapter and identity phases back to back
 - generate  → one personalized sample with its base, mask and annotations
 - eval      → the metric table for the final checkpoint, checked against THRESHOLDS

The full run (5000 sprites, 20k + 10k + 2k steps, 200 evaluation requests)
takes hours on a multicore desktop. ``--quick`` swaps in a tiny float64
model and a few dozen steps so the plumbing can be watched in minutes; the
thresholds are reported but not enforced in that mode.

Usage:
    uv run python scripts/run_desk_regression.py --work-dir runs/desk
    uv run python scripts/run_desk_regression.py --quick
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path
import sys
import tempfile
from typing import Any, Final

import dotenv

dotenv.load_dotenv()

# Add the project src/ to Python path for local imports when run directly
PROJECT_ROOT = Path(__file__).resolve().parents[1]
SRC_PATH = PROJECT_ROOT / "src"
sys.path.insert(0, str(SRC_PATH))

from dense_face.annotations import export_annotations  # noqa: E402
from dense_face.constants import MaskSource  # noqa: E402
from dense_face.evaluation import EvalReport, EvalSettings, evaluate_checkpoint  # noqa: E402
from dense_face.imaging import write_image  # noqa: E402
from dense_face.models import TrainConfig  # noqa: E402
from dense_face.network import DenseFaceNetwork  # noqa: E402
from dense_face.pipeline import GenerationPipeline, GenerationRequest, write_mask  # noqa: E402
from dense_face.services import ConfigService, ModelService  # noqa: E402
from dense_face.synthfaces import SpriteDataset, generate_dataset, load_dataset  # noqa: E402
from dense_face.training import (  # noqa: E402
    TrainResult,
    train_phase_adapter,
    train_phase_base,
    train_phase_identity,
)

SEPARATOR: Final[str] = "=" * 72

TINY: Final[dict[str, Any]] = {
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
    "timesteps": 50,
    "dtype": "float64",
    "batch_size": 4,
    "eval_interval": 10,
    "log_interval": 5,
}


@dataclass(frozen=True)
class Plan:
    n: int
    base_steps: int
    adapter_steps: int
    identity_steps: int
    eval_n: int
    overrides: dict[str, Any]


FULL: Final[Plan] = Plan(5000, 20000, 10000, 2000, 200, {})
QUICK: Final[Plan] = Plan(60, 20, 20, 20, 4, TINY)


# (label, getter, bound, higher_is_better)
THRESHOLDS: Final[list[tuple[str, str, float, bool]]] = [
    ("pose yaw error (deg)", "pose.yaw", 10.0, False),
    ("pose pitch error (deg)", "pose.pitch", 10.0, False),
    ("pose roll error (deg)", "pose.roll", 10.0, False),
    ("identity cosine", "identity.mean", 0.80, True),
    ("identity cosine, permuted", "identity.permuted_mean", 0.50, False),
    ("background colour accuracy", "attributes.background", 0.9, True),
    ("hair colour accuracy", "attributes.hair", 0.8, True),
    ("mask IoU", "annotations.mask_iou", 0.8, True),
    ("landmark error (px)", "annotations.landmark_px", 2.5, False),
    ("depth MAE", "annotations.depth_mae", 0.08, False),
    ("background byte equality", "background.rate", 1.0, True),
]


def banner(title: str) -> None:
    print(f"\n{SEPARATOR}\n{title}\n{SEPARATOR}")


def section(title: str) -> None:
    print(f"\n-- {title}")


def metric(report: EvalReport, dotted: str) -> float | None:
    value: Any = report
    for part in dotted.split("."):
        value = getattr(value, part)
    return value


def check_thresholds(report: EvalReport) -> bool:
    section("Calibrated bars")
    ok = True
    for label, dotted, bound, higher in THRESHOLDS:
        value = metric(report, dotted)
        passed = value is not None and (value >= bound if higher else value <= bound)
        ok &= passed
        shown = "n/a" if value is None else f"{value:.4f}"
        relation = ">=" if higher else "<="
        print(f"> {'PASS' if passed else 'FAIL'}  {label}: {shown} {relation} {bound}")
    return ok


def report_phase(name: str, result: TrainResult, path: Path, digest: str) -> None:
    losses = result.state.loss_history
    print(f"> {name}: {result.state.step} steps, last loss {losses[-1]:.4f}")
    if result.state.heldout_history:
        step, loss = result.state.heldout_history[-1]
        print(f"> held-out loss at step {step}: {loss:.4f}")
    print(f"> checkpoint {path.name} {digest[:16]}")


def train_all(work: Path, dataset: SpriteDataset, plan: Plan) -> tuple[DenseFaceNetwork, str]:
    base = train_phase_base(
        TrainConfig(**plan.overrides, steps=plan.base_steps), dataset, progress=True
    )
    path = work / "base.dfck"
    report_phase("base", base, path, ModelService.save(path, base.network, base))

    adapter_cfg = TrainConfig(**plan.overrides, steps=plan.adapter_steps, phase="adapter")
    adapter = train_phase_adapter(adapter_cfg, dataset, base.network, progress=True)
    path = work / "adapter.dfck"
    report_phase("adapter", adapter, path, ModelService.save(path, adapter.network, adapter))

    identity_cfg = TrainConfig(**plan.overrides, steps=plan.identity_steps, phase="identity")
    identity = train_phase_identity(identity_cfg, dataset, adapter.network, progress=True)
    path = work / "identity.dfck"
    digest = ModelService.save(path, identity.network, identity)
    report_phase("identity", identity, path, digest)
    return identity.network, digest


def generate_sample(work: Path, dataset: SpriteDataset, network: DenseFaceNetwork) -> None:
    entry = dataset.entries[dataset.indices("heldout")[0]]
    req = GenerationRequest(
        mode="personalized",
        caption=entry.caption,
        id_params=list(entry.id_params),
        pose=(entry.pose[0], entry.pose[1], entry.pose[2]),
        seed=1,
        mask=MaskSource.PREDICTED,
    )
    result = GenerationPipeline(network).generate(req)
    out = work / "sample"
    out.mkdir(parents=True, exist_ok=True)
    write_image(out / "final.png", result.image)
    if result.base is not None:
        write_image(out / "base.png", result.base)
    if result.mask is not None:
        write_mask(out / "mask.png", result.mask)
        fallback = " (ellipse fallback)" if result.mask.fell_back else ""
        print(f"> mask source: {result.mask.source.value}{fallback}")
    if result.annotations is not None:
        export_annotations(result.annotations, out)
    print(f"> caption: {entry.caption}")
    print(f"> written to {out}")


def run(work: Path, plan: Plan, *, enforce: bool) -> bool:
    banner("dense-face desk regression")
    section(f"Render {plan.n} sprites")
    data = work / "data"
    workers = ConfigService.workers()
    summary = generate_dataset(plan.n, 0, data, workers=workers)
    print(f"> {summary.identities} identities, held out: {summary.heldout_identities}")
    dataset = load_dataset(data, workers=workers)

    section("Train")
    network, digest = train_all(work, dataset, plan)

    section("Generate one personalized sample")
    generate_sample(work, dataset, network)

    section(f"Evaluate on {plan.eval_n} samples")
    settings = EvalSettings(n=plan.eval_n, workers=workers)
    report = evaluate_checkpoint(network, dataset, settings, content_hash=digest, progress=True)
    (work / "eval.json").write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    print(report.to_table())
    passed = check_thresholds(report)
    if not enforce:
        print("> quick mode: bars reported, not enforced")
        return True
    return passed


def main() -> None:
    parser = argparse.ArgumentParser(description="Run the desk-scale loop end to end")
    parser.add_argument("--work-dir", help="Keep artifacts here (default: a temp dir)")
    parser.add_argument("--quick", action="store_true", help="Tiny model, few steps")
    args = parser.parse_args()
    plan = QUICK if args.quick else FULL
    enforce = not args.quick
    if args.work_dir:
        work = Path(args.work_dir)
        work.mkdir(parents=True, exist_ok=True)
        ok = run(work, plan, enforce=enforce)
    else:
        with tempfile.TemporaryDirectory(prefix="dense-face-") as tmp:
            ok = run(Path(tmp), plan, enforce=enforce)
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
