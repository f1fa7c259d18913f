"""Command-line entry point.

Subcommands: synth, train, dehaze, eval, bench, params, gradcheck. Exit codes
are 0 on success, 1 on runtime failure and 2 on usage or input errors. Flags
override values from the experiment config (``--config`` or the
FASTNET_DEHAZE_CONFIG environment variable).
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from fastnet_dehazing.bench.benchmark import BenchSpec, run_bench
from fastnet_dehazing.data.manifest import load_dataset
from fastnet_dehazing.data.scenes import write_scenes
from fastnet_dehazing.data.synthesis import SynthesisSpec, synthesize_dataset
from fastnet_dehazing.errors import DatasetError, DehazeError, ImageNotFoundError, InvalidParameterError
from fastnet_dehazing.imaging.image_core import Image, load_image, save_image
from fastnet_dehazing.losses.losses import LOSS_COMBINATIONS
from fastnet_dehazing.metrics.quality import PSNR_IDENTICAL_TAG, evaluate_pairs
from fastnet_dehazing.models.builder import DehazeModel, build_model, build_preset, dehaze, parameter_breakdown
from fastnet_dehazing.models.checkpoint import model_from_checkpoint, save_checkpoint
from fastnet_dehazing.models.config import PRESETS, REFERENCE_PARAMS, REFINEMENT_BUDGET
from fastnet_dehazing.nn.gradcheck import grad_check
from fastnet_dehazing.nn.layers import param_count
from fastnet_dehazing.training.config import ExperimentConfig, load_experiment
from fastnet_dehazing.training.stagewise import train_regime
from fastnet_dehazing.training.trainer import train_combination
from fastnet_dehazing.utils.env_loader import default_config_path, load_environment
from fastnet_dehazing.utils.logging import get_logger

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
IMAGE_SUFFIXES = (".png", ".ppm")

EVAL_HEADER = "model | PSNR | SSIM | parameters"

logger = get_logger("fastnet_dehazing.cli")


class UsageError(DehazeError):
    """Bad flags or input paths; maps to exit code 2."""


def format_eval_row(model: str, psnr_db: Optional[float], ssim: float, parameters: Optional[int]) -> str:
    """``<model> | <PSNR, 2 dp> | <SSIM, 4 dp> | <parameter count or ->``"""
    psnr_text = PSNR_IDENTICAL_TAG if psnr_db is None else f"{psnr_db:.2f}"
    params_text = "-" if parameters is None else str(parameters)
    return f"{model} | {psnr_text} | {ssim:.4f} | {params_text}"


def _parse_sizes(text: str) -> List[Tuple[int, int]]:
    sizes = []
    for item in text.split(","):
        h, _, w = item.strip().lower().partition("x")
        try:
            sizes.append((int(h), int(w or h)))
        except ValueError as e:
            raise argparse.ArgumentTypeError(f"bad size '{item}', expected HxW") from e
    return sizes


def _parse_ints(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad integer list '{text}'") from e


def _add_model_flags(parser: argparse.ArgumentParser):
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--checkpoint", type=Path, help="FDHZ checkpoint to load")
    group.add_argument("--preset", choices=sorted(PRESETS), help="build a freshly initialised preset model")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fastnet_dehazing", description="Single-image dehazing toolkit")
    parser.add_argument("--seed", type=int, default=None, help="seed for initialisation, data order and synthesis")
    parser.add_argument("--config", type=Path, default=None, help="experiment config JSON (default: $FASTNET_DEHAZE_CONFIG)")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="generate a synthetic hazy dataset")
    synth.add_argument("--clean", type=Path, help="directory of clean PNG/PPM images")
    synth.add_argument("--depth", type=Path, help="directory of depth rasters (FMAP or 8-bit) with matching names")
    synth.add_argument("--out", type=Path, required=True, help="output dataset directory")
    synth.add_argument("--variations", type=int, default=None, help="haze draws per clean image (default 4)")
    synth.add_argument("--workers", type=int, default=None, help="parallel synthesis threads")
    synth.add_argument("--procedural", type=int, default=None, metavar="N", help="generate N procedural scenes as input")
    synth.add_argument("--size", type=int, default=64, help="procedural scene size in pixels")

    train = commands.add_parser("train", help="train a model on a dataset manifest")
    train.add_argument("--data", type=Path, required=True, help="manifest.csv written by synth")
    _add_model_flags(train)
    train.add_argument("--out", type=Path, required=True, help="directory for checkpoints and history")
    train.add_argument("--epochs", type=int, help="maximum epochs")
    train.add_argument("--batch-size", type=int, help="samples per batch")
    train.add_argument("--lr", type=float, help="learning rate")
    train.add_argument("--patience", type=int, help="early-stopping patience in epochs")
    train.add_argument("--loss", help=f"loss combination, one of: {', '.join(LOSS_COMBINATIONS)} ('->' also accepted)")
    train.add_argument("--regime", choices=["mse_x1", "mse_x4", "step"], help="DualFastNet training regime")

    dehaze_cmd = commands.add_parser("dehaze", help="dehaze images of any size")
    _add_model_flags(dehaze_cmd)
    dehaze_cmd.add_argument("inputs", nargs="+", type=Path, help="hazy images or directories of images")
    dehaze_cmd.add_argument("--out", type=Path, required=True, help="output directory")
    dehaze_cmd.add_argument("--side-by-side", action="store_true", help="also write hazy | dehazed comparisons")

    evaluate = commands.add_parser("eval", help="PSNR/SSIM of a model on a split, or of prediction/truth folders")
    _add_model_flags(evaluate)
    evaluate.add_argument("--data", type=Path, help="manifest.csv to evaluate on")
    evaluate.add_argument("--split", default="test", choices=["train", "val", "test"], help="manifest split")
    evaluate.add_argument("--pred", type=Path, help="directory of predicted images")
    evaluate.add_argument("--truth", type=Path, help="directory of ground-truth images with matching names")
    evaluate.add_argument("--name", help="model name printed in the result row")
    evaluate.add_argument("--report", type=Path, help="write per-pair JSON lines here")
    evaluate.add_argument("--workers", type=int, default=None, help="parallel scoring threads")

    bench = commands.add_parser("bench", help="forward-pass throughput sweep")
    _add_model_flags(bench)
    bench.add_argument("--sizes", type=_parse_sizes, help="comma-separated HxW list, e.g. 64x64,128x128")
    bench.add_argument("--batches", type=_parse_ints, help="comma-separated batch sizes")
    bench.add_argument("--runs", type=int, help="timed runs per cell (default 20)")
    bench.add_argument("--warmup", type=int, help="untimed warmup runs per cell (default 3)")
    bench.add_argument("--threads", type=int, help="torch threads (>1 marks the report as parallel)")
    bench.add_argument("--precision", help="precision tag recorded in the report")
    bench.add_argument("--out", type=Path, help="write the JSON-lines report here")

    params = commands.add_parser("params", help="parameter counts per module")
    _add_model_flags(params)

    check = commands.add_parser("gradcheck", help="finite-difference gradient check of a model")
    _add_model_flags(check)
    check.add_argument("--size", type=int, default=32, help="square input size (multiple of 32)")
    check.add_argument("--tol", type=float, default=1e-4, help="relative error tolerance")
    check.add_argument("--step", type=float, default=1e-6, help="finite-difference step")
    check.add_argument("--mode", choices=["eval", "train"], default="eval", help="BN mode during the check")
    return parser


def _experiment(args) -> ExperimentConfig:
    path = args.config or default_config_path()
    if path is None:
        return ExperimentConfig()
    if not Path(path).exists():
        raise UsageError(f"config file not found: {path}")
    return load_experiment(path)


def _seed(args, experiment: ExperimentConfig) -> int:
    return args.seed if args.seed is not None else experiment.train.seed


def _model(args, experiment: ExperimentConfig, default_preset: Optional[str] = None) -> Tuple[str, DehazeModel]:
    seed = _seed(args, experiment)
    if getattr(args, "checkpoint", None) is not None:
        if not args.checkpoint.exists():
            raise UsageError(f"checkpoint not found: {args.checkpoint}")
        return args.checkpoint.stem, model_from_checkpoint(args.checkpoint)
    preset = getattr(args, "preset", None) or experiment.model.preset
    if preset is None and args.config is None and default_config_path() is None:
        preset = default_preset
    if preset is not None:
        return preset, build_preset(preset, seed=seed)
    architecture, cfg = experiment.model.resolve()
    return architecture, build_model(architecture, cfg, seed=seed)


def _image_files(paths: Sequence[Path]) -> List[Path]:
    files = []
    for path in paths:
        if path.is_dir():
            files.extend(sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES))
        elif path.exists():
            files.append(path)
        else:
            raise UsageError(f"input not found: {path}")
    return files


def cmd_synth(args, experiment: ExperimentConfig) -> int:
    base = experiment.data or SynthesisSpec()
    update = {"output_dir": args.out, "seed": base.seed if args.seed is None else args.seed}
    if args.variations is not None:
        update["variations_per_image"] = args.variations
    if args.workers is not None:
        update["workers"] = args.workers
    spec = SynthesisSpec.model_validate({**base.model_dump(), **update})

    if args.procedural is not None:
        clean_dir, depth_dir = write_scenes(args.out / "_scenes", args.procedural, args.size, args.size, spec.seed)
    else:
        if args.clean is None or args.depth is None:
            raise UsageError("synth needs --clean and --depth, or --procedural N")
        for path in (args.clean, args.depth):
            if not path.is_dir():
                raise UsageError(f"input directory not found: {path}")
        clean_dir, depth_dir = args.clean, args.depth

    try:
        records = synthesize_dataset(clean_dir, depth_dir, spec)
    except DatasetError as e:
        raise UsageError(str(e)) from e
    print(f"{len(records)} records written to {spec.output_dir / 'manifest.csv'}")
    return EXIT_OK


def cmd_train(args, experiment: ExperimentConfig) -> int:
    if not args.data.exists():
        raise UsageError(f"manifest not found: {args.data}")
    update = {"seed": _seed(args, experiment), "checkpoint_dir": args.out}
    for flag, field in (("epochs", "max_epochs"), ("batch_size", "batch_size"), ("lr", "lr"),
                        ("patience", "early_stop_patience"), ("loss", "combination"), ("regime", "regime")):
        if getattr(args, flag) is not None:
            update[field] = getattr(args, flag)
    cfg = experiment.train.model_validate({**experiment.train.model_dump(), **update})

    name, model = _model(args, experiment, default_preset="toy_fastnet")
    train_set = load_dataset(args.data, "train")
    val_set = load_dataset(args.data, "val")
    if len(val_set) == 0:
        logger.warning("manifest has no validation split; validating on the training split")
        val_set = train_set

    args.out.mkdir(parents=True, exist_ok=True)
    if cfg.regime is not None:
        best, history = train_regime(model, train_set, val_set, cfg)
    else:
        best, history = train_combination(model, train_set, val_set, cfg)

    for slot_name, slot in (("model.fdhz", best.best_loss), ("model_best_ssim.fdhz", best.best_ssim)):
        if slot is not None:
            slot.restore(model)
            save_checkpoint(model, args.out / slot_name, {"epoch": slot.epoch, "stage": slot.stage})
    history.write(args.out / "history.jsonl")
    print(f"{name}: {history.epochs_run} epochs ({history.stop_reason}), tag '{history.tag}'")
    if best.best_loss is not None:
        print(f"best val loss {best.best_loss.value:.6f} at {best.best_loss.stage} epoch {best.best_loss.epoch}")
    print(f"checkpoint: {args.out / 'model.fdhz'}")
    return EXIT_OK


def cmd_dehaze(args, experiment: ExperimentConfig) -> int:
    _, model = _model(args, experiment, default_preset="toy_fastnet")
    files = _image_files(args.inputs)
    args.out.mkdir(parents=True, exist_ok=True)
    for path in files:
        hazy = load_image(path)
        if hazy.channels != 3:
            hazy = Image(data=np.repeat(hazy.data, 3, axis=2))
        result = dehaze(model, hazy)
        save_image(result, args.out / f"{path.stem}_dehazed.png")
        if args.side_by_side:
            save_image(Image(data=np.concatenate([hazy.data, result.data], axis=1)), args.out / f"{path.stem}_compare.png")
        print(f"{path} -> {args.out / (path.stem + '_dehazed.png')}")
    return EXIT_OK


def cmd_eval(args, experiment: ExperimentConfig) -> int:
    if args.pred is not None or args.truth is not None:
        if args.pred is None or args.truth is None:
            raise UsageError("--pred and --truth must be given together")
        pairs = []
        for pred in _image_files([args.pred]):
            truth = args.truth / pred.name
            if not truth.exists():
                raise UsageError(f"no ground truth for {pred} at {truth}")
            pairs.append((load_image(pred), load_image(truth)))
        name, parameters = args.name or args.pred.name, None
    else:
        if args.data is None:
            raise UsageError("eval needs --data MANIFEST or --pred/--truth")
        if not args.data.exists():
            raise UsageError(f"manifest not found: {args.data}")
        name, model = _model(args, experiment, default_preset="toy_fastnet")
        name, parameters = args.name or name, param_count(model)
        pairs = [(dehaze(model, sample.hazy), sample.clean) for sample in load_dataset(args.data, args.split)]
    if not pairs:
        raise UsageError("nothing to evaluate")

    report = evaluate_pairs(pairs, workers=args.workers)
    if args.report is not None:
        report.write(args.report)
    print(EVAL_HEADER)
    print(format_eval_row(name, report.psnr_mean_db, report.ssim_mean, parameters))
    return EXIT_OK


def cmd_bench(args, experiment: ExperimentConfig) -> int:
    base = experiment.bench or BenchSpec()
    update = {"seed": _seed(args, experiment)}
    if args.checkpoint is not None:
        if not args.checkpoint.exists():
            raise UsageError(f"checkpoint not found: {args.checkpoint}")
        update.update(checkpoint=args.checkpoint, preset=None)
    elif args.preset is not None:
        update.update(preset=args.preset, architecture=None, checkpoint=None)
    for flag, field in (("sizes", "resolutions"), ("batches", "batch_sizes"), ("runs", "runs"),
                        ("warmup", "warmup"), ("threads", "threads"), ("precision", "precision")):
        if getattr(args, flag) is not None:
            update[field] = getattr(args, flag)
    report = run_bench(BenchSpec.model_validate({**base.model_dump(), **update}))
    if args.out is not None:
        report.write(args.out)
    print(report.to_table())
    print(f"parameters: {report.parameters}")
    print(f"host: {report.fingerprint}")
    return EXIT_OK


def cmd_params(args, experiment: ExperimentConfig) -> int:
    name, model = _model(args, experiment, default_preset="small_fastnet")
    breakdown = parameter_breakdown(model)
    width = max(len(k) for k in breakdown) + 2
    print(f"model: {name} ({model.architecture})")
    for module, count in breakdown.items():
        print(f"{module:<{width}}{count:>14,}")

    total = breakdown["total"]
    reference = REFERENCE_PARAMS.get(name)
    if reference is not None:
        delta = total - reference
        print(f"{'reference':<{width}}{reference:>14,}  (delta {delta:+,}, {100.0 * delta / reference:+.2f}%)")
    refinement = breakdown["refinement"]
    print(f"refinement head {refinement:,} vs budget {REFINEMENT_BUDGET:,} (delta {refinement - REFINEMENT_BUDGET:+,})")
    return EXIT_OK


def cmd_gradcheck(args, experiment: ExperimentConfig) -> int:
    name, model = _model(args, experiment, default_preset="toy_fastnet")
    if args.size % 32:
        raise UsageError(f"--size must be a multiple of 32, got {args.size}")
    report = grad_check(model, (1, 3, args.size, args.size), h=args.step, tol=args.tol,
                        seed=_seed(args, experiment), mode=args.mode)
    print(f"model: {name}")
    print(report.to_text())
    return EXIT_OK if report.passed else EXIT_FAILURE


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "dehaze": cmd_dehaze,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "params": cmd_params,
    "gradcheck": cmd_gradcheck,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    load_environment()
    try:
        experiment = _experiment(args)
        return COMMANDS[args.command](args, experiment)
    except (UsageError, ImageNotFoundError, InvalidParameterError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DehazeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
