"""Command-line interface: corpus preparation, experiments, and image tools."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from facehall import __version__
from facehall.experiments import (
    SWEEP_AXES,
    ExperimentSpec,
    ingest,
    run_experiment,
    run_sweep,
    spec_from_config_dict,
)
from facehall.imagecore import bicubic_upscale, degrade, load_image, save_image, to_luminance
from facehall.metrics import evaluate, write_report_csv
from facehall.synth import synth_faces

logger = logging.getLogger("facehall")

_CONFIG_KEYS = (
    "scale",
    "patch",
    "overlap",
    "window",
    "step",
    "tau",
    "k",
    "f",
    "rl_iters",
    "ridge_eps",
    "seed",
    "train_size",
    "workers",
    "height",
    "width",
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="JSON config file; flags override its values")
    parser.add_argument("--scale", type=int, default=None, help="down-sampling factor (default 4)")
    parser.add_argument("--patch", type=int, default=None, help="HR patch size (default 12)")
    parser.add_argument("--overlap", type=int, default=None, help="patch overlap (default 4)")
    parser.add_argument("--window", type=int, default=None, help="context window size (default 20)")
    parser.add_argument("--step", type=int, default=None, help="context window stride (default 2)")
    parser.add_argument("--tau", type=float, default=None, help="locality regularization (default 0.04)")
    parser.add_argument("--k", type=int, default=None, help="nearest-neighbor count (default 360)")
    parser.add_argument("--f", type=float, default=None, help="position feature weight (default 10)")
    parser.add_argument("--rl-iters", dest="rl_iters", type=int, default=None, help="reproducing-learning iterations (default 5)")
    parser.add_argument("--ridge-eps", dest="ridge_eps", type=float, default=None, help=argparse.SUPPRESS)


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", type=Path, default=None, help="directory of aligned HR images")
    parser.add_argument("--synth", type=int, default=None, help="generate a synthetic corpus of this size instead")
    parser.add_argument("--height", type=int, default=None, help="synthetic image height (default 120)")
    parser.add_argument("--width", type=int, default=None, help="synthetic image width (default 100)")
    parser.add_argument("--test-dir", dest="test_dir", type=Path, default=None, help="directory of held-out HR test images")
    parser.add_argument("--train-size", dest="train_size", type=int, default=None, help="train/test split size when no test dir is given")
    parser.add_argument("--seed", type=int, default=None, help="seed for splits and synthesis (default 0)")
    parser.add_argument("--color", action=argparse.BooleanOptionalAction, default=None, help="run the color (luminance-only reconstruction) path")
    parser.add_argument("--workers", type=int, default=None, help="parallel test-image workers (default 1)")
    parser.add_argument("--shift", type=str, default=None, help="test-image translation 'dy,dx' before degradation")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    _add_config_flags(parser)


def _merged_config(args: argparse.Namespace) -> dict:
    merged: dict = {}
    if getattr(args, "config", None):
        data = json.loads(Path(args.config).read_text())
        merged.update(data.get("config", data))
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    for key in ("corpus", "synth", "test_dir"):
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = str(value) if isinstance(value, Path) else value
    if getattr(args, "color", None) is not None:
        merged["color"] = args.color
    if getattr(args, "shift", None) is not None:
        parts = [int(v) for v in str(args.shift).split(",")]
        if len(parts) == 1:
            parts = [parts[0], parts[0]]
        merged["shift"] = parts[:2]
    return merged


def _build_spec(args: argparse.Namespace) -> ExperimentSpec:
    return spec_from_config_dict(_merged_config(args), args.out)


def _cmd_synth(args: argparse.Namespace) -> int:
    faces = synth_faces(args.count, args.seed, args.height, args.width)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(args.count)))
    for i, face in enumerate(faces):
        save_image(out / f"face_{i:0{width}d}.{args.format}", face)
    print(f"wrote {len(faces)} synthetic faces to {out}")
    return 0


def _cmd_prepare(args: argparse.Namespace) -> int:
    ids, images = ingest(args.corpus)
    lr_dir = Path(args.out) / "lr"
    up_dir = Path(args.out) / "upscaled"
    lr_dir.mkdir(parents=True, exist_ok=True)
    up_dir.mkdir(parents=True, exist_ok=True)
    for image_id, img in zip(ids, images):
        lr = degrade(img, args.scale)
        save_image(lr_dir / f"{image_id}.png", lr)
        save_image(up_dir / f"{image_id}.png", bicubic_upscale(lr, args.scale))
    print(f"prepared {len(ids)} LR/upscaled pairs under {args.out}")
    return 0


def _cmd_degrade(args: argparse.Namespace) -> int:
    save_image(args.output, degrade(load_image(args.input), args.scale))
    return 0


def _cmd_upscale(args: argparse.Namespace) -> int:
    save_image(args.output, bicubic_upscale(load_image(args.input), args.scale))
    return 0


def _cmd_metrics(args: argparse.Namespace) -> int:
    out_ids, outputs = ingest(args.outputs)
    truth_ids, truths = ingest(args.truth)
    if out_ids != truth_ids:
        raise ValueError(
            f"output ids {out_ids[:4]}... do not match ground-truth ids {truth_ids[:4]}..."
        )
    outputs = [to_luminance(o) for o in outputs]
    truths = [to_luminance(t) for t in truths]
    report = evaluate(outputs, truths, ids=out_ids)
    write_report_csv(report, args.out)
    print(f"mean PSNR {report.mean_psnr_db:.4f} dB, mean SSIM {report.mean_ssim:.6f} -> {args.out}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    spec = _build_spec(args)
    summary = run_experiment(spec)
    results = summary["results"]
    print(
        f"{len(results['per_image'])} images: mean PSNR {results['mean_psnr_db']:.4f} dB, "
        f"mean SSIM {results['mean_ssim']:.6f} (bicubic {results['mean_bicubic_psnr_db']:.4f} dB)"
    )
    if summary["failures"]:
        for failure in summary["failures"]:
            print(
                f"FAILED {failure['id']} during {failure['stage']}: {failure['error']}",
                file=sys.stderr,
            )
        return 1
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    spec = _build_spec(args)
    values = tuple(float(v) for v in args.values.split(","))
    spec.sweep_axis = args.axis
    spec.sweep_values = values
    summary = run_sweep(spec)
    for row in summary["rows"]:
        tag = f" [{row['variant']}]" if row["variant"] else ""
        print(
            f"{args.axis}={row['value']:g}{tag}: mean PSNR {row['mean_psnr_db']:.4f} dB, "
            f"mean SSIM {row['mean_ssim']:.6f}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="facehall",
        description="Context-patch face hallucination experiments",
    )
    parser.add_argument("--version", action="version", version=f"facehall {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic aligned face corpus")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--height", type=int, default=120)
    p.add_argument("--width", type=int, default=100)
    p.add_argument("--format", choices=("png", "pgm"), default="png")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("prepare", help="derive LR and bicubic-upscaled sets from an HR corpus")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--scale", type=int, default=4)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_prepare)

    p = sub.add_parser("run", help="hallucinate a test set against a training corpus")
    _add_run_flags(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="repeat a run across one parameter axis")
    p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p.add_argument("--values", type=str, required=True, help="comma-separated sweep values")
    _add_run_flags(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("degrade", help="average-smooth and down-sample one image")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)
    p.add_argument("--scale", type=int, default=4)
    p.set_defaults(func=_cmd_degrade)

    p = sub.add_parser("upscale", help="bicubic-upscale one image")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)
    p.add_argument("--scale", type=int, default=4)
    p.set_defaults(func=_cmd_upscale)

    p = sub.add_parser("metrics", help="PSNR/SSIM report for two aligned image directories")
    p.add_argument("--outputs", type=Path, required=True)
    p.add_argument("--truth", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_metrics)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
