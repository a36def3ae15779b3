"""Command-line entrypoint for dense-face.

Subcommands:
- synth: render a sprite dataset
- train: run one training phase and write a checkpoint
- generate: text-editing, face-generation or personalized sampling
- eval: generate for dataset samples and write an evaluation report
- inspect: list a checkpoint's tensors, groups and stored configuration

Every command writes a run manifest, on success and on failure. By default it
sits next to the output as ``<out>.manifest.json``; ``inspect`` writes
``<ckpt>.inspect.manifest.json``.
Exit codes: 0 success, 1 usage or configuration error, 2 I/O error, 3 corrupt
checkpoint.
"""

from __future__ import annotations

import argparse
from collections.abc import Callable, Sequence
import hashlib
import json
from pathlib import Path
import sys
from typing import Any, Final, NoReturn

import dotenv
from fastmcp.utilities.logging import configure_logging, get_logger
import numpy as np
from pydantic import ValidationError

from dense_face.annotations import export_annotations
from dense_face.conditioning import PoseCondition
from dense_face.constants import Constants, MaskSource, TrainPhase
from dense_face.evaluation import EvalSettings, evaluate_checkpoint
from dense_face.exceptions import (
    ArtifactIOError,
    CheckpointCorruptError,
    ConfigError,
    DenseFaceError,
    UsageError,
)
from dense_face.imaging import write_image
from dense_face.models import TrainConfig
from dense_face.pipeline import GenerationPipeline, GenerationRequest, write_mask
from dense_face.services import ConfigService, ModelService, RunRecorder
from dense_face.synthfaces import generate_dataset, load_dataset
from dense_face.training import (
    CheckpointArchive,
    load_checkpoint,
    train_phase_adapter,
    train_phase_base,
    train_phase_identity,
)

_logger = get_logger(__name__)

EXIT_OK: Final[int] = 0
EXIT_USAGE: Final[int] = 1
EXIT_IO: Final[int] = 2
EXIT_CORRUPT: Final[int] = 3

# TrainConfig keys that are set through dedicated flags
_RESERVED_TRAIN_KEYS: Final[frozenset[str]] = frozenset({"phase"})


class _Parser(argparse.ArgumentParser):
    """Argument parser that raises ``UsageError`` instead of exiting."""

    def error(self, message: str) -> NoReturn:
        msg = f"{self.prog}: {message}"
        raise UsageError(msg)


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, CheckpointCorruptError):
        return EXIT_CORRUPT
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_USAGE


def _manifest_path(args: argparse.Namespace) -> Path | None:
    if getattr(args, "manifest", None):
        return Path(args.manifest)
    out = getattr(args, "out", None) or getattr(args, "report", None)
    if out:
        target = Path(out)
        return target.with_name(f"{target.name.rstrip('/') or 'out'}.manifest.json")
    # inspect writes beside the checkpoint, apart from its training manifest
    ckpt = getattr(args, "ckpt", None)
    if args.command == "inspect" and ckpt:
        target = Path(ckpt)
        return target.with_name(f"{target.name}.inspect.manifest.json")
    return None


def _progress() -> bool:
    return sys.stderr.isatty()


def _parse_floats(value: str, what: str) -> list[float]:
    """Comma- or space-separated floats, inline or from a file.

    A file may also hold a JSON list, or a JSON object with an ``id_params``
    list (a dataset manifest line).
    """
    path = Path(value)
    text = value
    if path.is_file():
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            msg = f"cannot read {what} file {path}: {exc}"
            raise ArtifactIOError(msg) from exc
        stripped = text.strip()
        if stripped.startswith(("[", "{")):
            try:
                data = json.loads(stripped)
            except json.JSONDecodeError as exc:
                msg = f"invalid JSON in {what} file {path}: {exc}"
                raise ConfigError(msg) from exc
            items = data.get("id_params") if isinstance(data, dict) else data
            if not isinstance(items, list):
                msg = f"{what} file {path} holds no list of numbers"
                raise ConfigError(msg)
            text = ",".join(str(v) for v in items)
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        msg = f"{what} must be numbers separated by commas, got {value!r}"
        raise ConfigError(msg) from exc


# ---- synth -----------------------------------------------------------------
def cmd_synth(args: argparse.Namespace, recorder: RunRecorder) -> int:
    workers = ConfigService.workers(deterministic=args.deterministic)
    recorder.set_config(
        {
            "n": args.n,
            "seed": args.seed,
            "out": args.out,
            "poses_per_identity": args.poses_per_identity,
            "workers": workers,
        }
    )
    recorder.seed("dataset", args.seed)
    summary = generate_dataset(
        args.n,
        args.seed,
        Path(args.out),
        poses_per_identity=args.poses_per_identity,
        workers=workers,
    )
    recorder.artifact("dataset", Path(summary.root))
    recorder.artifact("manifest", Path(summary.manifest))
    _logger.info(
        "Dataset ready: %d samples, %d identities (%d held out)",
        summary.n,
        summary.identities,
        len(summary.heldout_identities),
    )
    return EXIT_OK


# ---- train -----------------------------------------------------------------
def _train_overrides(args: argparse.Namespace) -> dict[str, Any]:
    overrides = {
        key: getattr(args, key)
        for key in TrainConfig.model_fields
        if key not in _RESERVED_TRAIN_KEYS
    }
    overrides["phase"] = args.phase
    # store_true flag: False means "not given"
    overrides["deterministic"] = True if args.deterministic else None
    return overrides


def cmd_train(args: argparse.Namespace, recorder: RunRecorder) -> int:
    phase = TrainPhase(args.phase)
    if phase is not TrainPhase.BASE and not args.base_ckpt:
        msg = f"{phase.value} phase requires --base-ckpt"
        raise UsageError(msg)
    if args.resume and not args.base_ckpt:
        msg = "--resume requires --base-ckpt pointing at a checkpoint of the same phase"
        raise UsageError(msg)
    config = ConfigService.resolve_train_config(
        Path(args.config) if args.config else None, _train_overrides(args)
    )
    recorder.set_config(
        {
            **config.model_dump(mode="json"),
            "data": args.data,
            "base_ckpt": args.base_ckpt,
            "out": args.out,
            "resume": args.resume,
        }
    )
    recorder.seed("train", config.seed)
    dataset = load_dataset(
        Path(args.data), workers=ConfigService.workers(deterministic=config.deterministic)
    )
    loaded = ModelService.load(Path(args.base_ckpt)) if args.base_ckpt else None
    if loaded is not None:
        recorder.checkpoint(Path(args.base_ckpt), loaded.content_hash)
    resume = loaded.resume_point(phase) if loaded is not None and args.resume else None
    if args.resume and resume is None:
        msg = f"{args.base_ckpt} holds no {phase.value} training state to resume"
        raise ConfigError(msg)
    progress = _progress()
    if phase is TrainPhase.BASE:
        base = loaded.network if loaded is not None else None
        result = train_phase_base(config, dataset, network=base, resume=resume, progress=progress)
    elif loaded is None:
        msg = f"{phase.value} phase requires --base-ckpt"
        raise UsageError(msg)
    elif phase is TrainPhase.ADAPTER:
        result = train_phase_adapter(
            config, dataset, loaded.network, resume=resume, progress=progress
        )
    else:
        result = train_phase_identity(
            config, dataset, loaded.network, resume=resume, progress=progress
        )
    out = Path(args.out)
    digest = ModelService.save(out, result.network, result)
    recorder.checkpoint(out, digest)
    recorder.artifact("checkpoint", out)
    return EXIT_OK


# ---- generate --------------------------------------------------------------
def _mask_flag(value: str) -> tuple[MaskSource, str | None]:
    if value.startswith("file:"):
        return MaskSource.FILE, value.removeprefix("file:")
    try:
        return MaskSource(value), None
    except ValueError as exc:
        msg = f"--mask must be ellipse, predicted or file:PATH, got {value!r}"
        raise UsageError(msg) from exc


def build_request(args: argparse.Namespace) -> GenerationRequest:
    """Translate generate flags into a validated request.

    Raises:
        UsageError: If the flags are inconsistent with the mode
    """
    given = [f for f in ("id_spec", "id_image", "id_embed") if getattr(args, f)]
    if args.mode != "text" and len(given) != 1:
        flags = ", ".join(f"--{f.replace('_', '-')}" for f in given) or "none"
        msg = (
            f"--mode {args.mode} needs exactly one of --id-spec, --id-image or "
            f"--id-embed (given: {flags})"
        )
        raise UsageError(msg)
    source, mask_path = _mask_flag(args.mask)
    pose = PoseCondition.parse(args.pose) if args.pose else PoseCondition()
    try:
        return GenerationRequest(
            mode=args.mode,
            caption=args.caption,
            id_params=_parse_floats(args.id_spec, "--id-spec") if args.id_spec else None,
            id_image=args.id_image,
            id_embedding=_parse_floats(args.id_embed, "--id-embed") if args.id_embed else None,
            pose=(pose.yaw, pose.pitch, pose.roll),
            seed=args.seed,
            steps=args.steps,
            guidance=args.guidance,
            eta=args.eta,
            mask=source,
            mask_path=mask_path,
            lambda_id=args.lambda_id,
            use_pose_token=False if args.no_pose_token else None,
            use_pose_branch=False if args.no_pose_branch else None,
        )
    except ValidationError as exc:
        msg = f"invalid generation flags: {exc}"
        raise UsageError(msg) from exc


def cmd_generate(args: argparse.Namespace, recorder: RunRecorder) -> int:
    req = build_request(args)
    recorder.set_config({**req.model_dump(mode="json"), "ckpt": args.ckpt, "out": args.out})
    recorder.seed("generate", req.seed)
    loaded = ModelService.load(Path(args.ckpt))
    recorder.checkpoint(Path(args.ckpt), loaded.content_hash)
    result = GenerationPipeline(loaded.network).generate(req)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        msg = f"cannot create output directory {out}: {exc}"
        raise ArtifactIOError(msg) from exc
    suffix = f".{args.format}"
    name = "final" if req.mode == "personalized" else "image"
    write_image(out / f"{name}{suffix}", result.image)
    recorder.artifact(name, out / f"{name}{suffix}")
    if result.base is not None:
        write_image(out / f"base{suffix}", result.base)
        recorder.artifact("base", out / f"base{suffix}")
    if result.mask is not None:
        mask_suffix = ".png" if args.format == "png" else ".pgm"
        write_mask(out / f"mask{mask_suffix}", result.mask)
        recorder.artifact("mask", out / f"mask{mask_suffix}")
        recorder.set_config({"mask_resolved": result.mask.source.value})
    if result.annotations is not None:
        for role, path in export_annotations(result.annotations, out).items():
            recorder.artifact(role, path)
    return EXIT_OK


# ---- eval / inspect --------------------------------------------------------
def cmd_eval(args: argparse.Namespace, recorder: RunRecorder) -> int:
    settings = EvalSettings(
        n=args.n,
        seed=args.seed,
        steps=args.steps,
        guidance=args.guidance,
        workers=ConfigService.workers(deterministic=args.deterministic),
    )
    recorder.set_config(
        {
            "ckpt": args.ckpt,
            "data": args.data,
            "report": args.report,
            "n": settings.n,
            "seed": settings.seed,
            "steps": settings.steps,
            "guidance": settings.guidance,
        }
    )
    recorder.seed("eval", settings.seed)
    loaded = ModelService.load(Path(args.ckpt))
    recorder.checkpoint(Path(args.ckpt), loaded.content_hash)
    dataset = load_dataset(Path(args.data), workers=settings.workers)
    report = evaluate_checkpoint(
        loaded.network,
        dataset,
        settings,
        content_hash=loaded.content_hash,
        progress=_progress(),
    )
    report_path = Path(args.report)
    try:
        report_path.parent.mkdir(parents=True, exist_ok=True)
        report_path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        msg = f"cannot write report {report_path}: {exc}"
        raise ArtifactIOError(msg) from exc
    recorder.artifact("report", report_path)
    sys.stdout.write(report.to_table() + "\n")
    return EXIT_OK


def describe_checkpoint(path: Path, archive: CheckpointArchive | None = None) -> str:
    """Human-readable listing of a verified checkpoint."""
    if archive is None:
        archive = load_checkpoint(path)
    meta = archive.metadata
    lines = [
        f"checkpoint {path}",
        f"content hash {archive.content_hash}",
        f"format version {archive.version}",
        f"groups {', '.join(meta.get('groups', [])) or '-'}",
        f"tensors {len(archive.entries)}",
    ]
    width = max((len(e.name) for e in archive.entries), default=4)
    for entry in archive.entries:
        digest = hashlib.sha256(
            np.ascontiguousarray(archive.tensors[entry.name]).tobytes()
        ).hexdigest()
        shape = "x".join(str(d) for d in entry.shape) or "scalar"
        lines.append(f"  {entry.name:<{width}}  {entry.dtype}  {shape:>14}  {digest[:16]}")
    stored = {k: meta[k] for k in ("model", "train_config", "training") if k in meta}
    lines.append("stored configuration:")
    lines.append(json.dumps(stored, indent=2, sort_keys=True))
    return "\n".join(lines)


def cmd_inspect(args: argparse.Namespace, recorder: RunRecorder) -> int:
    path = Path(args.ckpt)
    recorder.set_config({"ckpt": args.ckpt})
    archive = load_checkpoint(path)
    recorder.checkpoint(path, archive.content_hash)
    sys.stdout.write(describe_checkpoint(path, archive) + "\n")
    return EXIT_OK


# ---- parser ----------------------------------------------------------------
def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--manifest",
        help="Run manifest path (default: <out>.manifest.json, <ckpt>.inspect.manifest.json)",
    )
    parser.add_argument(
        "--deterministic",
        action="store_true",
        help="Single worker thread for bit-exact reruns",
    )


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    """One ``--key`` flag per TrainConfig field; values are validated by TrainConfig."""
    for key, field in TrainConfig.model_fields.items():
        if key in _RESERVED_TRAIN_KEYS or key == "deterministic":
            continue
        flag = "--" + key.replace("_", "-")
        parser.add_argument(flag, dest=key, default=None, help=field.description)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dense-face", description="Dense-face desk-scale toolkit")
    parser.add_argument("--version", action="version", version=Constants.VERSION)
    parser.add_argument(
        "--log-level",
        dest="log_level",
        type=str.upper,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Overrides DENSEFACE_LOG_LEVEL",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    synth = sub.add_parser("synth", help="Render a synthetic sprite dataset")
    synth.add_argument("--n", type=int, default=5000, help="Number of samples")
    synth.add_argument("--seed", type=int, default=0, help="Master seed")
    synth.add_argument("--out", required=True, help="Output directory")
    synth.add_argument(
        "--poses-per-identity",
        type=int,
        default=Constants.POSES_PER_IDENTITY,
        help="Samples rendered per identity",
    )
    _add_common(synth)
    synth.set_defaults(handler=cmd_synth)

    train = sub.add_parser("train", help="Run one training phase")
    train.add_argument(
        "--phase", choices=[p.value for p in TrainPhase], default="base", help="Training phase"
    )
    train.add_argument("--config", help="Config file (JSON or key=value)")
    train.add_argument("--data", required=True, help="Dataset directory")
    train.add_argument("--base-ckpt", dest="base_ckpt", help="Checkpoint to continue from")
    train.add_argument("--out", required=True, help="Checkpoint to write")
    train.add_argument(
        "--resume",
        action="store_true",
        help="Continue the same phase from --base-ckpt's optimizer state",
    )
    _add_train_flags(train)
    _add_common(train)
    train.set_defaults(handler=cmd_train)

    gen = sub.add_parser("generate", help="Sample images from a checkpoint")
    gen.add_argument(
        "--mode", choices=["text", "face", "personalized"], default="text", help="Entry point"
    )
    gen.add_argument("--caption", default="", help="Caption from the template grammar")
    gen.add_argument("--id-spec", dest="id_spec", help="Eight identity floats or a file")
    gen.add_argument("--id-image", dest="id_image", help="Reference face crop image")
    gen.add_argument("--id-embed", dest="id_embed", help="Identity embedding floats or a file")
    gen.add_argument("--pose", help="Head pose 'yaw,pitch,roll' in degrees (--pose=-20,0,0)")
    gen.add_argument("--seed", type=int, default=0, help="Noise seed")
    gen.add_argument(
        "--steps", type=int, default=Constants.INFERENCE_STEPS, help="DDIM steps"
    )
    gen.add_argument(
        "--guidance", type=float, default=Constants.GUIDANCE_SCALE, help="Guidance scale"
    )
    gen.add_argument("--eta", type=float, default=0.0, help="DDIM stochasticity")
    gen.add_argument(
        "--mask", default=MaskSource.PREDICTED.value, help="ellipse, predicted or file:PATH"
    )
    gen.add_argument("--lambda-id", dest="lambda_id", type=float, help="Override lambda")
    gen.add_argument("--no-pose-token", action="store_true", help="Drop the pose token")
    gen.add_argument("--no-pose-branch", action="store_true", help="Skip pose-branch features")
    gen.add_argument("--format", choices=["ppm", "png"], default="ppm", help="Image format")
    gen.add_argument("--ckpt", required=True, help="Checkpoint")
    gen.add_argument("--out", required=True, help="Output directory")
    _add_common(gen)
    gen.set_defaults(handler=cmd_generate)

    ev = sub.add_parser("eval", help="Evaluate a checkpoint on dataset samples")
    ev.add_argument("--ckpt", required=True, help="Checkpoint")
    ev.add_argument("--data", required=True, help="Dataset directory")
    ev.add_argument("--n", type=int, default=16, help="Samples to generate")
    ev.add_argument("--report", required=True, help="JSON report path")
    ev.add_argument("--seed", type=int, default=0, help="Base seed")
    ev.add_argument("--steps", type=int, default=Constants.INFERENCE_STEPS, help="DDIM steps")
    ev.add_argument(
        "--guidance", type=float, default=Constants.GUIDANCE_SCALE, help="Guidance scale"
    )
    _add_common(ev)
    ev.set_defaults(handler=cmd_eval)

    insp = sub.add_parser("inspect", help="List a checkpoint's tensors and configuration")
    insp.add_argument("--ckpt", required=True, help="Checkpoint")
    insp.add_argument(
        "--manifest", help="Run manifest path (default: <ckpt>.inspect.manifest.json)"
    )
    insp.set_defaults(handler=cmd_inspect)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv``, run the command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _logger.error("%s", exc)
        return EXIT_USAGE
    if args.log_level:
        configure_logging(level=args.log_level)
    handler: Callable[[argparse.Namespace, RunRecorder], int] = args.handler
    recorder = RunRecorder(args.command, _manifest_path(args))
    code = EXIT_OK
    error: str | None = None
    try:
        code = handler(args, recorder)
    except (DenseFaceError, ValidationError, OSError) as exc:
        code = exit_code_for(exc)
        error = f"{type(exc).__name__}: {exc}"
        _logger.error("%s failed: %s", args.command, error)
    except KeyboardInterrupt:
        code = EXIT_USAGE
        error = "interrupted"
        _logger.info("Interrupted by user. Exiting.")
    try:
        recorder.finish(code, error)
    except ArtifactIOError as exc:
        _logger.error("%s", exc)
        return code or EXIT_IO
    return code


def main() -> None:
    """Console-script entry point."""
    dotenv.load_dotenv()
    configure_logging(level=ConfigService.log_level())
    sys.exit(run())


if __name__ == "__main__":
    main()
