"""Experiment orchestration: ingestion, splits, runs, and parameter sweeps.

A run hallucinates every test image against a training corpus and writes the
per-image estimates, a metrics CSV, trend figures, and a JSON summary whose
recorded configuration reproduces the run. A sweep repeats the run across
one parameter axis, one sub-directory per value.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from facehall import __version__
from facehall.figures import plot_iteration_curve, plot_sweep_trend
from facehall.imagecore import bicubic_upscale, degrade, load_image, save_image, to_luminance
from facehall.metrics import QualityReport, psnr, ssim, write_report_csv
from facehall.pipeline import (
    HallucinationConfig,
    hallucinate,
    hallucinate_color,
    prepare_corpus,
)
from facehall.synth import synth_faces

logger = logging.getLogger(__name__)

SWEEP_AXES = ("tau", "k", "window", "f", "train_size", "rl_iterations", "shift")

_IMAGE_SUFFIXES = (".png", ".pgm", ".ppm")


@dataclass
class ExperimentSpec:
    """Everything needed to reproduce one run or sweep."""

    output_dir: Path
    corpus_dir: Path | None = None
    synth_count: int | None = None
    synth_height: int = 120
    synth_width: int = 100
    test_dir: Path | None = None
    train_size: int | None = None
    seed: int = 0
    config: HallucinationConfig = field(default_factory=HallucinationConfig)
    color: bool = False
    workers: int = 1
    shift: tuple[int, int] = (0, 0)
    sweep_axis: str | None = None
    sweep_values: tuple[float, ...] = ()


def spec_to_config_dict(spec: ExperimentSpec) -> dict:
    """Flag-named configuration block recorded in every summary."""
    cfg = spec.config
    return {
        "corpus": str(spec.corpus_dir) if spec.corpus_dir else None,
        "synth": spec.synth_count,
        "height": spec.synth_height,
        "width": spec.synth_width,
        "test_dir": str(spec.test_dir) if spec.test_dir else None,
        "train_size": spec.train_size,
        "seed": spec.seed,
        "color": spec.color,
        "workers": spec.workers,
        "shift": list(spec.shift),
        "scale": cfg.scale,
        "patch": cfg.patch_size,
        "overlap": cfg.overlap,
        "window": cfg.window_size,
        "step": cfg.context_step,
        "tau": cfg.tau,
        "k": cfg.k,
        "f": cfg.position_weight,
        "rl_iters": cfg.rl_iterations,
        "ridge_eps": cfg.ridge_eps,
        "rl_accumulate": cfg.rl_accumulate,
    }


def spec_from_config_dict(data: dict, output_dir: str | Path) -> ExperimentSpec:
    """Rebuild a spec from a recorded configuration block."""
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]  # accept a whole summary.json
    cfg = HallucinationConfig(
        scale=int(data.get("scale", 4)),
        patch_size=int(data.get("patch", 12)),
        overlap=int(data.get("overlap", 4)),
        window_size=int(data.get("window", 20)),
        context_step=int(data.get("step", 2)),
        tau=float(data.get("tau", 0.04)),
        k=int(data.get("k", 360)),
        position_weight=float(data.get("f", 10.0)),
        rl_iterations=int(data.get("rl_iters", 5)),
        ridge_eps=float(data.get("ridge_eps", 1e-8)),
        rl_accumulate=bool(data.get("rl_accumulate", False)),
    )
    shift = data.get("shift", [0, 0])
    return ExperimentSpec(
        output_dir=Path(output_dir),
        corpus_dir=Path(data["corpus"]) if data.get("corpus") else None,
        synth_count=data.get("synth"),
        synth_height=int(data.get("height", 120)),
        synth_width=int(data.get("width", 100)),
        test_dir=Path(data["test_dir"]) if data.get("test_dir") else None,
        train_size=data.get("train_size"),
        seed=int(data.get("seed", 0)),
        config=cfg,
        color=bool(data.get("color", False)),
        workers=int(data.get("workers", 1)),
        shift=(int(shift[0]), int(shift[1])),
    )


def ingest(corpus_dir: str | Path, color: bool = False) -> tuple[list[str], list[np.ndarray]]:
    """Load all images from a directory, sorted by filename.

    All images must share dimensions; color files are reduced to luminance
    unless color mode is requested, and grayscale files are promoted to
    three channels when it is.
    """
    corpus_dir = Path(corpus_dir)
    files = sorted(p for p in corpus_dir.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)
    if not files:
        raise ValueError(f"no images found in {corpus_dir}")
    ids, images, dims = [], [], {}
    for path in files:
        img = load_image(path)
        dims.setdefault(img.shape[:2], []).append(path.name)
        if color:
            img = np.repeat(img[:, :, None], 3, axis=2) if img.ndim == 2 else img
        else:
            img = to_luminance(img)
        ids.append(path.stem)
        images.append(img)
    if len(dims) > 1:
        listing = "; ".join(
            f"{h}x{w}: {', '.join(names[:4])}" for (h, w), names in sorted(dims.items())
        )
        raise ValueError(f"mixed image dimensions in {corpus_dir}: {listing}")
    return ids, images


def split_corpus(count: int, train_size: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle split into train and test index arrays."""
    if not (0 < train_size < count):
        raise ValueError(f"train_size {train_size} must be in (0, {count})")
    perm = np.random.default_rng(seed).permutation(count)
    return np.sort(perm[:train_size]), np.sort(perm[train_size:])


def shift_image(img: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Translate by whole pixels with edge replication."""
    h, w = img.shape[:2]
    ys = np.clip(np.arange(h) - dy, 0, h - 1)
    xs = np.clip(np.arange(w) - dx, 0, w - 1)
    return img.take(ys, axis=0).take(xs, axis=1)


def _resolve_images(spec: ExperimentSpec) -> tuple[list[str], list[np.ndarray]]:
    if spec.corpus_dir is not None:
        return ingest(spec.corpus_dir, color=spec.color)
    if spec.synth_count is not None:
        faces = synth_faces(spec.synth_count, spec.seed, spec.synth_height, spec.synth_width)
        width = max(4, len(str(spec.synth_count)))
        ids = [f"face_{i:0{width}d}" for i in range(spec.synth_count)]
        if spec.color:
            return ids, [np.repeat(f[:, :, None], 3, axis=2) for f in faces]
        return ids, list(faces)
    raise ValueError("spec needs either corpus_dir or synth_count")


def _hallucinate_one(
    image_id: str,
    hr_truth: np.ndarray,
    corpus,
    spec: ExperimentSpec,
) -> dict:
    """Degrade one ground-truth image, hallucinate it, and score the results."""
    cfg = spec.config
    if spec.shift != (0, 0):
        hr_truth = shift_image(hr_truth, *spec.shift)
    lr = degrade(hr_truth, cfg.scale)
    baseline = bicubic_upscale(lr, cfg.scale)
    record: dict = {"id": image_id}
    if spec.color:
        final = hallucinate_color(lr, corpus, cfg)
        truth_y, final_y, base_y = map(to_luminance, (hr_truth, final, baseline))
        trace_metrics = []
    else:
        final, trace = hallucinate(lr, corpus, cfg)
        truth_y, final_y, base_y = hr_truth, final, baseline
        trace_metrics = [psnr(est, truth_y) for est in trace]
        record["trace"] = trace
    record.update(
        baseline=baseline,
        final=final,
        psnr_db=psnr(final_y, truth_y),
        ssim=ssim(final_y, truth_y),
        bicubic_psnr_db=psnr(base_y, truth_y),
        iteration_psnr_db=trace_metrics,
    )
    return record


def _save_outputs(record: dict, images_dir: Path) -> None:
    image_id = record["id"]
    save_image(images_dir / f"{image_id}_bicubic.png", record["baseline"])
    for k, est in enumerate(record.get("trace", [])):
        save_image(images_dir / f"{image_id}_iter{k}.png", est)
    save_image(images_dir / f"{image_id}_final.png", record["final"])


def run_experiment(spec: ExperimentSpec) -> dict:
    """Execute one configuration and write all artifacts under output_dir.

    Returns the summary dictionary that is also written to summary.json.
    Per-image failures are recorded and do not abort the run.
    """
    started = time.perf_counter()
    out = Path(spec.output_dir)
    images_dir = out / "images"
    images_dir.mkdir(parents=True, exist_ok=True)

    ids, images = _resolve_images(spec)
    if spec.test_dir is not None:
        train_ids, train_images = ids, images
        test_ids, test_images = ingest(spec.test_dir, color=spec.color)
    else:
        if spec.train_size is None:
            raise ValueError("spec needs either test_dir or train_size")
        train_idx, test_idx = split_corpus(len(images), spec.train_size, spec.seed)
        train_ids = [ids[i] for i in train_idx]
        train_images = [images[i] for i in train_idx]
        test_ids = [ids[i] for i in test_idx]
        test_images = [images[i] for i in test_idx]

    train_gray = [to_luminance(img) for img in train_images]
    corpus = prepare_corpus(np.stack(train_gray), spec.config)
    prepared = time.perf_counter()

    records: dict[str, dict] = {}
    failures: list[dict] = []

    def process(image_id: str, truth: np.ndarray) -> tuple[str, dict | None, str | None]:
        try:
            return image_id, _hallucinate_one(image_id, truth, corpus, spec), None
        except Exception as exc:  # per-image isolation; partial results survive
            logger.exception("hallucination failed for image %s", image_id)
            return image_id, None, f"{type(exc).__name__}: {exc}"

    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            outcomes = list(pool.map(process, test_ids, test_images))
    else:
        outcomes = [process(i, t) for i, t in zip(test_ids, test_images)]

    for image_id, record, error in outcomes:
        if record is None:
            failures.append({"id": image_id, "stage": "hallucinate", "error": error})
        else:
            records[image_id] = record

    for image_id in sorted(records):
        _save_outputs(records[image_id], images_dir)

    ok = [records[i] for i in sorted(records)]
    report = QualityReport(
        per_image=tuple((r["id"], r["psnr_db"], r["ssim"]) for r in ok),
        mean_psnr_db=float(np.mean([r["psnr_db"] for r in ok])) if ok else 0.0,
        mean_ssim=float(np.mean([r["ssim"] for r in ok])) if ok else 0.0,
    )
    write_report_csv(report, out / "metrics.csv")

    iteration_means: list[float] = []
    if ok and not spec.color and spec.config.rl_iterations > 0:
        per_iter = np.array([r["iteration_psnr_db"] for r in ok])
        iteration_means = [float(v) for v in per_iter.mean(axis=0)]
        figures_dir = out / "figures"
        figures_dir.mkdir(exist_ok=True)
        plot_iteration_curve(iteration_means, figures_dir / "psnr_per_iteration.png")

    summary = {
        "version": __version__,
        "config": spec_to_config_dict(spec),
        "train_ids": train_ids,
        "results": {
            "per_image": [
                {
                    "id": r["id"],
                    "psnr_db": r["psnr_db"],
                    "ssim": r["ssim"],
                    "bicubic_psnr_db": r["bicubic_psnr_db"],
                    "iteration_psnr_db": r["iteration_psnr_db"],
                }
                for r in ok
            ],
            "mean_psnr_db": report.mean_psnr_db,
            "mean_ssim": report.mean_ssim,
            "mean_bicubic_psnr_db": (
                float(np.mean([r["bicubic_psnr_db"] for r in ok])) if ok else 0.0
            ),
            "iteration_mean_psnr_db": iteration_means,
        },
        "failures": failures,
        "timings_s": {
            "prepare": prepared - started,
            "hallucinate": time.perf_counter() - prepared,
            "total": time.perf_counter() - started,
        },
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def _format_value(value: float) -> str:
    return f"{value:g}"


def _apply_axis(spec: ExperimentSpec, axis: str, value: float) -> ExperimentSpec:
    cfg = spec.config
    if axis == "tau":
        cfg = replace(cfg, tau=float(value))
    elif axis == "k":
        cfg = replace(cfg, k=int(value))
    elif axis == "window":
        cfg = replace(cfg, window_size=int(value))
    elif axis == "f":
        cfg = replace(cfg, position_weight=float(value))
    elif axis == "rl_iterations":
        cfg = replace(cfg, rl_iterations=int(value))
    elif axis == "train_size":
        return replace(spec, train_size=int(value), config=cfg)
    elif axis == "shift":
        return replace(spec, shift=(int(value), int(value)), config=cfg)
    else:
        raise ValueError(f"unknown sweep axis {axis!r} (expected one of {SWEEP_AXES})")
    return replace(spec, config=cfg)


def run_sweep(spec: ExperimentSpec) -> dict:
    """Run one sub-experiment per sweep value and aggregate the trend.

    Sub-runs whose summary.json already exists are left untouched, so a
    deleted sub-directory can be regenerated on its own.
    """
    if spec.sweep_axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {spec.sweep_axis!r} (expected one of {SWEEP_AXES})")
    if not spec.sweep_values:
        raise ValueError("sweep needs at least one value")
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    axis = spec.sweep_axis

    rows: list[dict] = []
    for value in spec.sweep_values:
        sub = _apply_axis(spec, axis, value)
        variants = [("", sub)]
        if axis == "shift":
            # misalignment experiments compare the context window against
            # the position-only (window == patch) configuration
            position_cfg = replace(
                sub.config, window_size=sub.config.patch_size, context_step=1
            )
            variants = [
                ("context", sub),
                ("position", replace(sub, config=position_cfg)),
            ]
        for variant, variant_spec in variants:
            sub_dir = out / (
                f"{axis}_{_format_value(value)}" + (f"_{variant}" if variant else "")
            )
            summary_path = sub_dir / "summary.json"
            if summary_path.exists():
                logger.info("skipping existing sub-run %s", sub_dir.name)
                summary = json.loads(summary_path.read_text())
            else:
                run_spec = replace(
                    variant_spec, output_dir=sub_dir, sweep_axis=None, sweep_values=()
                )
                summary = run_experiment(run_spec)
            rows.append(
                {
                    "axis": axis,
                    "value": value,
                    "variant": variant,
                    "mean_psnr_db": summary["results"]["mean_psnr_db"],
                    "mean_ssim": summary["results"]["mean_ssim"],
                }
            )

    with (out / "sweep.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["axis", "value", "variant", "mean_psnr_db", "mean_ssim"])
        for row in rows:
            writer.writerow(
                [
                    row["axis"],
                    _format_value(row["value"]),
                    row["variant"],
                    f"{row['mean_psnr_db']:.6f}",
                    f"{row['mean_ssim']:.6f}",
                ]
            )

    values = sorted({row["value"] for row in rows})
    series: dict[str, list[float]] = {}
    for row in rows:
        label = row["variant"] or axis
        series.setdefault(label, [0.0] * len(values))[values.index(row["value"])] = row[
            "mean_psnr_db"
        ]
    plot_sweep_trend(values, series, axis, "mean PSNR (dB)", out / "sweep_psnr.png")

    sweep_summary = {
        "version": __version__,
        "config": spec_to_config_dict(spec),
        "axis": axis,
        "values": list(spec.sweep_values),
        "rows": rows,
    }
    (out / "sweep_summary.json").write_text(json.dumps(sweep_summary, indent=2))
    return sweep_summary
