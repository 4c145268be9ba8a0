"""Patch-grid geometry, context-window candidates, features, and reassembly.

All patch arithmetic happens at the high-resolution scale, on buffers that
are either HR images or bicubic-upscaled LR images of identical size.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass(frozen=True)
class PatchGeometry:
    """Patch, overlap, and context-window sizes for one image extent.

    patch_size:   square patch side, HR pixels
    overlap:      shared pixels between adjacent grid patches
    window_size:  context window side centered on a patch position
    context_step: stride between candidate positions inside the window
    """

    patch_size: int
    overlap: int
    window_size: int
    context_step: int
    image_width: int
    image_height: int

    def __post_init__(self):
        p, o, w, s = self.patch_size, self.overlap, self.window_size, self.context_step
        if not (0 <= o < p):
            raise ValueError(f"overlap must satisfy 0 <= overlap < patch_size, got {o} vs {p}")
        if w < p:
            raise ValueError(f"window_size {w} must be >= patch_size {p}")
        if s < 1:
            raise ValueError(f"context_step must be >= 1, got {s}")
        if (w - p) % s:
            raise ValueError(f"window_size - patch_size ({w - p}) must be divisible by step {s}")
        if self.image_height < p or self.image_width < p:
            raise ValueError(
                f"image {self.image_height}x{self.image_width} is smaller than patch size {p}"
            )
        if w > self.image_height or w > self.image_width:
            raise ValueError(
                f"window {w} does not fit inside image "
                f"{self.image_height}x{self.image_width}"
            )

    @property
    def step(self) -> int:
        return self.patch_size - self.overlap

    @property
    def offsets_per_axis(self) -> int:
        return 1 + (self.window_size - self.patch_size) // self.context_step


@dataclass(frozen=True)
class PatchIndex:
    """Grid coordinates and pixel position of one patch."""

    grid_row: int
    grid_col: int
    top: int
    left: int


@dataclass(frozen=True)
class FeatureVector:
    """Mean-removed patch pixels augmented with weighted position entries.

    values holds p*p mean-removed intensities followed by f * x_hat and
    f * y_hat, where (x_hat, y_hat) are the patch's left/top normalized to
    [0, 1] by the available extent. source_mean is the removed mean.
    """

    values: np.ndarray
    source_mean: float


@dataclass(frozen=True)
class ContextCandidateSet:
    """All context-patch candidates gathered for one test-patch position.

    features:   (N, p*p + 2) candidate feature vectors
    hr_patches: (N, p, p) high-frequency residual patches
    distances:  (N,) Euclidean distances from the test feature
    source_ids: (N, 3) integer rows (image_index, row_offset, col_offset)
                with offsets relative to the test position
    positions:  (N, 2) candidate (top, left) pixel positions
    """

    features: np.ndarray
    hr_patches: np.ndarray
    distances: np.ndarray
    source_ids: np.ndarray
    positions: np.ndarray

    def __len__(self) -> int:
        return self.features.shape[0]

    def position_patch_indices(self) -> np.ndarray:
        """Indices of candidates sitting exactly at the test-patch position."""
        mask = (self.source_ids[:, 1] == 0) & (self.source_ids[:, 2] == 0)
        return np.nonzero(mask)[0]


def _axis_starts(extent: int, patch: int, step: int) -> list[int]:
    """Stride starts along one axis, with the final patch clamped to the border.

    The last stride position is snapped to extent - patch so the grid reaches
    the border; if snapping would open a gap wider than the patch, the border
    start is appended instead so coverage is never lost.
    """
    starts = list(range(0, extent - patch + 1, step))
    last = extent - patch
    if starts[-1] != last:
        if len(starts) > 1 and last - starts[-2] <= patch:
            starts[-1] = last
        else:
            starts.append(last)
    return starts


def enumerate_grid(geom: PatchGeometry) -> list[PatchIndex]:
    """Row-major patch grid covering every pixel of the image."""
    rows = _axis_starts(geom.image_height, geom.patch_size, geom.step)
    cols = _axis_starts(geom.image_width, geom.patch_size, geom.step)
    return [
        PatchIndex(grid_row=i, grid_col=j, top=top, left=left)
        for i, top in enumerate(rows)
        for j, left in enumerate(cols)
    ]


def candidate_count(training_size: int, geom: PatchGeometry) -> int:
    """Number of context-patch candidates at an interior position."""
    return training_size * geom.offsets_per_axis**2


def _normalized_position(top: int, left: int, geom: PatchGeometry) -> tuple[float, float]:
    x_extent = geom.image_width - geom.patch_size
    y_extent = geom.image_height - geom.patch_size
    x_hat = left / x_extent if x_extent else 0.0
    y_hat = top / y_extent if y_extent else 0.0
    return x_hat, y_hat


def make_lr_feature(
    patch_pixels: np.ndarray,
    index: PatchIndex,
    position_weight: float,
    geom: PatchGeometry,
) -> FeatureVector:
    """Build the augmented feature for one patch of an upscaled LR image."""
    pix = np.asarray(patch_pixels, dtype=np.float64).ravel()
    if pix.size != geom.patch_size**2:
        raise ValueError(
            f"expected {geom.patch_size**2} pixels, got {pix.size}"
        )
    mean = float(pix.mean())
    x_hat, y_hat = _normalized_position(index.top, index.left, geom)
    values = np.concatenate(
        [pix - mean, [position_weight * x_hat, position_weight * y_hat]]
    )
    return FeatureVector(values=values, source_mean=mean)


def make_hr_residual(hr_patch: np.ndarray, upscaled_lr_patch: np.ndarray) -> np.ndarray:
    """High-frequency residual of an HR patch over its interpolated LR patch."""
    hr = np.asarray(hr_patch, dtype=np.float64)
    lr = np.asarray(upscaled_lr_patch, dtype=np.float64)
    if hr.shape != lr.shape:
        raise ValueError(f"patch shapes differ: {hr.shape} vs {lr.shape}")
    return hr - lr


def candidate_positions(position: PatchIndex, geom: PatchGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Candidate (tops, lefts) of the context window centered on a position.

    The window is shifted inward at image borders so the number of candidate
    offsets per training image stays constant.
    """
    span = geom.window_size - geom.patch_size
    offsets = np.arange(0, span + 1, geom.context_step)
    win_top = min(max(position.top - span // 2, 0), geom.image_height - geom.window_size)
    win_left = min(max(position.left - span // 2, 0), geom.image_width - geom.window_size)
    return win_top + offsets, win_left + offsets


def _window_features(
    images: np.ndarray,
    tops: np.ndarray,
    lefts: np.ndarray,
    geom: PatchGeometry,
    position_weight: float,
) -> np.ndarray:
    """Feature matrix for every (image, top, left) combination, row-major."""
    p = geom.patch_size
    m = images.shape[0]
    view = sliding_window_view(images, (p, p), axis=(1, 2))
    pix = view[:, tops[:, None], lefts[None, :]].reshape(m * tops.size * lefts.size, p * p)
    feats = np.empty((pix.shape[0], p * p + 2), dtype=np.float64)
    feats[:, : p * p] = pix - pix.mean(axis=1, keepdims=True)
    x_extent = geom.image_width - p
    y_extent = geom.image_height - p
    x_hat = lefts / x_extent if x_extent else np.zeros_like(lefts, dtype=np.float64)
    y_hat = tops / y_extent if y_extent else np.zeros_like(tops, dtype=np.float64)
    grid_y, grid_x = np.meshgrid(y_hat, x_hat, indexing="ij")
    feats[:, p * p] = np.tile(position_weight * grid_x.ravel(), m)
    feats[:, p * p + 1] = np.tile(position_weight * grid_y.ravel(), m)
    return feats


def gather_candidates(
    test_feature: FeatureVector,
    position: PatchIndex,
    lr_images: np.ndarray,
    hr_residuals: np.ndarray,
    geom: PatchGeometry,
    position_weight: float,
) -> ContextCandidateSet:
    """Collect every context-patch candidate for one test-patch position.

    lr_images holds the stacked bicubic-upscaled LR training images with
    shape (M, H, W); hr_residuals the aligned high-frequency residuals.
    Candidates are ordered image-major, then window-row, then window-column.
    """
    lr_images = np.asarray(lr_images, dtype=np.float64)
    hr_residuals = np.asarray(hr_residuals, dtype=np.float64)
    if lr_images.ndim != 3 or lr_images.shape[0] == 0:
        raise ValueError("training set is empty")
    if lr_images.shape != hr_residuals.shape:
        raise ValueError(
            f"LR stack {lr_images.shape} and residual stack {hr_residuals.shape} differ"
        )
    p = geom.patch_size
    m = lr_images.shape[0]
    tops, lefts = candidate_positions(position, geom)

    feats = _window_features(lr_images, tops, lefts, geom, position_weight)
    diff = feats - test_feature.values[None, :]
    distances = np.sqrt(np.einsum("nd,nd->n", diff, diff))

    view = sliding_window_view(hr_residuals, (p, p), axis=(1, 2))
    hr_patches = view[:, tops[:, None], lefts[None, :]].reshape(-1, p, p)

    grid_t, grid_l = np.meshgrid(tops, lefts, indexing="ij")
    pos = np.stack([grid_t.ravel(), grid_l.ravel()], axis=1)
    positions = np.tile(pos, (m, 1))
    source_ids = np.empty((m * pos.shape[0], 3), dtype=np.int64)
    source_ids[:, 0] = np.repeat(np.arange(m), pos.shape[0])
    source_ids[:, 1] = positions[:, 0] - position.top
    source_ids[:, 2] = positions[:, 1] - position.left

    return ContextCandidateSet(
        features=feats,
        hr_patches=hr_patches,
        distances=distances,
        source_ids=source_ids,
        positions=positions,
    )


def extract_patch(image: np.ndarray, index: PatchIndex, patch_size: int) -> np.ndarray:
    return image[index.top : index.top + patch_size, index.left : index.left + patch_size]


def assemble(
    patches: Iterable[tuple[PatchIndex, np.ndarray]] | Sequence[tuple[PatchIndex, np.ndarray]],
    geom: PatchGeometry,
) -> np.ndarray:
    """Average overlapping patch values into a full-size buffer.

    Each output pixel is the arithmetic mean of all patch values covering
    it. Accumulation follows the given patch order, so results are
    deterministic for a fixed grid.
    """
    p = geom.patch_size
    acc = np.zeros((geom.image_height, geom.image_width), dtype=np.float64)
    count = np.zeros((geom.image_height, geom.image_width), dtype=np.float64)
    for index, values in patches:
        block = np.asarray(values, dtype=np.float64).reshape(p, p)
        acc[index.top : index.top + p, index.left : index.left + p] += block
        count[index.top : index.top + p, index.left : index.left + p] += 1.0
    if (count == 0).any():
        raise RuntimeError("patch list leaves uncovered pixels")
    return acc / count
