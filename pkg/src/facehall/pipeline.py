"""End-to-end hallucination: corpus preparation, the per-patch solve loop,
image reassembly, and the reproducing-learning outer loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from facehall.imagecore import bicubic_upscale, degrade, rgb_to_yuv, yuv_to_rgb
from facehall.patches import (
    PatchGeometry,
    assemble,
    candidate_count,
    enumerate_grid,
    extract_patch,
    gather_candidates,
    make_lr_feature,
)
from facehall.tlcr import (
    DegenerateSolutionError,
    SolverConfig,
    predict_hr_patch,
    select_knn,
    solve_weights,
    uniform_weights,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HallucinationConfig:
    """All tunables of the hallucination pipeline with their defaults."""

    scale: int = 4
    patch_size: int = 12
    overlap: int = 4
    window_size: int = 20
    context_step: int = 2
    tau: float = 0.04
    k: int = 360
    position_weight: float = 10.0
    rl_iterations: int = 5
    ridge_eps: float = 1e-8
    rl_accumulate: bool = False

    def __post_init__(self):
        if self.scale < 2:
            raise ValueError(f"scale must be >= 2, got {self.scale}")
        if self.rl_iterations < 0:
            raise ValueError(f"rl_iterations must be >= 0, got {self.rl_iterations}")

    def geometry(self, image_height: int, image_width: int) -> PatchGeometry:
        return PatchGeometry(
            patch_size=self.patch_size,
            overlap=self.overlap,
            window_size=self.window_size,
            context_step=self.context_step,
            image_width=image_width,
            image_height=image_height,
        )

    def solver(self) -> SolverConfig:
        return SolverConfig(tau=self.tau, k=self.k, ridge_eps=self.ridge_eps)


@dataclass(frozen=True)
class TrainingCorpus:
    """Paired HR images, their upscaled LR counterparts, and HR residuals.

    Arrays are stacked (M, H, W). provenance tags each slot as 'original' or
    'reproduced'; the reproducing-learning loop keeps at most one reproduced
    slot unless accumulation is requested.
    """

    hr_images: np.ndarray
    upscaled_lr: np.ndarray
    hr_residuals: np.ndarray
    geometry: PatchGeometry
    position_weight: float
    provenance: tuple[str, ...]

    @property
    def size(self) -> int:
        return self.hr_images.shape[0]


def prepare_corpus(hr_images: Sequence[np.ndarray] | np.ndarray, cfg: HallucinationConfig) -> TrainingCorpus:
    """Build a training corpus from aligned HR images.

    LR counterparts are synthesized by degrading and bicubic-upscaling each
    HR image; residuals are the HR minus upscaled-LR differences.
    """
    stack = np.asarray(hr_images, dtype=np.float64)
    if stack.ndim == 2:
        stack = stack[None, ...]
    if stack.ndim != 3 or stack.shape[0] == 0:
        raise ValueError("need at least one 2D training image")
    h, w = stack.shape[1:]
    if h % cfg.scale or w % cfg.scale:
        raise ValueError(f"image dims {h}x{w} are not divisible by scale {cfg.scale}")

    upscaled = np.stack([bicubic_upscale(degrade(img, cfg.scale), cfg.scale) for img in stack])
    residuals = stack - upscaled
    return TrainingCorpus(
        hr_images=stack,
        upscaled_lr=upscaled,
        hr_residuals=residuals,
        geometry=cfg.geometry(h, w),
        position_weight=cfg.position_weight,
        provenance=("original",) * stack.shape[0],
    )


def with_reproduced(
    corpus: TrainingCorpus, estimate: np.ndarray, cfg: HallucinationConfig
) -> TrainingCorpus:
    """Corpus extended by a hallucinated HR estimate and its degraded pair.

    In replacement mode (the default) any existing reproduced slot is
    dropped first, so the corpus never holds more than one.
    """
    keep = (
        np.ones(corpus.size, dtype=bool)
        if cfg.rl_accumulate
        else np.array([tag == "original" for tag in corpus.provenance])
    )
    est = np.asarray(estimate, dtype=np.float64)
    up = bicubic_upscale(degrade(est, cfg.scale), cfg.scale)
    tags = tuple(t for t, k in zip(corpus.provenance, keep) if k) + ("reproduced",)
    return TrainingCorpus(
        hr_images=np.concatenate([corpus.hr_images[keep], est[None]]),
        upscaled_lr=np.concatenate([corpus.upscaled_lr[keep], up[None]]),
        hr_residuals=np.concatenate([corpus.hr_residuals[keep], (est - up)[None]]),
        geometry=corpus.geometry,
        position_weight=corpus.position_weight,
        provenance=tags,
    )


def hallucinate_once(
    lr_input: np.ndarray, corpus: TrainingCorpus, cfg: HallucinationConfig
) -> np.ndarray:
    """One hallucination pass: per-patch represent-and-predict, then reassemble."""
    lr = np.asarray(lr_input, dtype=np.float64)
    geom = corpus.geometry
    if lr.shape != (geom.image_height // cfg.scale, geom.image_width // cfg.scale):
        raise ValueError(
            f"LR input {lr.shape} does not match corpus HR dims "
            f"{geom.image_height}x{geom.image_width} at scale {cfg.scale}"
        )
    upscaled = bicubic_upscale(lr, cfg.scale)
    solver_cfg = cfg.solver()
    n_candidates = candidate_count(corpus.size, geom)
    if solver_cfg.k > n_candidates:
        logger.warning(
            "k=%d exceeds the %d available candidates; clamping", solver_cfg.k, n_candidates
        )
        solver_cfg = replace(solver_cfg, k=n_candidates)

    predicted = []
    for index in enumerate_grid(geom):
        pixels = extract_patch(upscaled, index, geom.patch_size)
        feature = make_lr_feature(pixels, index, corpus.position_weight, geom)
        cands = gather_candidates(
            feature, index, corpus.upscaled_lr, corpus.hr_residuals, geom, corpus.position_weight
        )
        chosen = select_knn(cands.distances, solver_cfg.k)
        try:
            weights = solve_weights(
                feature.values,
                cands.features[chosen],
                cands.distances[chosen],
                solver_cfg,
                indices=chosen,
            )
        except DegenerateSolutionError as exc:
            logger.warning(
                "patch (%d, %d): %s; falling back to uniform weights",
                index.grid_row,
                index.grid_col,
                exc,
            )
            weights = uniform_weights(chosen)
        predicted.append((index, predict_hr_patch(weights, cands.hr_patches[weights.indices])))

    residual = assemble(predicted, geom)
    return np.clip(upscaled + residual, 0.0, 1.0)


def hallucinate(
    lr_input: np.ndarray, corpus: TrainingCorpus, cfg: HallucinationConfig
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Full pipeline with the reproducing-learning loop.

    Iteration 0 runs on the given corpus; each later iteration re-estimates
    the same LR input after feeding the previous estimate back into the
    corpus. Returns the final estimate and the per-iteration trace
    (rl_iterations + 1 entries).
    """
    estimate = hallucinate_once(lr_input, corpus, cfg)
    trace = [estimate]
    base = corpus
    for _ in range(cfg.rl_iterations):
        base = with_reproduced(base if cfg.rl_accumulate else corpus, estimate, cfg)
        estimate = hallucinate_once(lr_input, base, cfg)
        trace.append(estimate)
    return estimate, trace


def hallucinate_color(
    lr_input: np.ndarray, corpus: TrainingCorpus, cfg: HallucinationConfig
) -> np.ndarray:
    """Color pipeline: hallucinate luminance, bicubic-upscale the chroma."""
    lr = np.asarray(lr_input, dtype=np.float64)
    if lr.ndim != 3 or lr.shape[2] != 3:
        raise ValueError(f"expected a (H, W, 3) color image, got {lr.shape}")
    yuv = rgb_to_yuv(lr)
    luma, _ = hallucinate(yuv[..., 0], corpus, cfg)
    chroma_u = bicubic_upscale(yuv[..., 1], cfg.scale)
    chroma_v = bicubic_upscale(yuv[..., 2], cfg.scale)
    return yuv_to_rgb(np.stack([luma, chroma_u, chroma_v], axis=-1))
