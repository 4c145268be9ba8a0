"""Image quality metrics (PSNR, single-scale SSIM) and report aggregation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

PSNR_CAP_DB = 99.0

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB on the [0, 1] intensity scale.

    Identical images return the 99 dB cap instead of infinity.
    """
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {y.shape}")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(-10.0 * np.log10(mse), PSNR_CAP_DB)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def _windowed_mean(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    win = sliding_window_view(img, kernel.shape)
    return np.einsum("ijkl,kl->ij", win, kernel)


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Single-scale structural similarity with the standard parameters.

    Gaussian 11x11 window with sigma 1.5, K1=0.01, K2=0.03, dynamic range
    1.0, averaged over valid window positions (no border padding).
    """
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {y.shape}")
    if x.ndim != 2 or min(x.shape) < _SSIM_WINDOW:
        raise ValueError(f"images must be at least {_SSIM_WINDOW}x{_SSIM_WINDOW}, got {x.shape}")

    kernel = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)
    mu_x = _windowed_mean(x, kernel)
    mu_y = _windowed_mean(y, kernel)
    var_x = _windowed_mean(x * x, kernel) - mu_x * mu_x
    var_y = _windowed_mean(y * y, kernel) - mu_y * mu_y
    cov = _windowed_mean(x * y, kernel) - mu_x * mu_y

    c1 = _SSIM_K1**2
    c2 = _SSIM_K2**2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class QualityReport:
    """Per-image PSNR/SSIM rows plus their arithmetic means."""

    per_image: tuple[tuple[str, float, float], ...]
    mean_psnr_db: float
    mean_ssim: float


def evaluate(
    outputs: Sequence[np.ndarray],
    ground_truths: Sequence[np.ndarray],
    ids: Sequence[str] | None = None,
) -> QualityReport:
    """Score aligned output/truth pairs; rows are ordered by id."""
    if len(outputs) != len(ground_truths):
        raise ValueError(
            f"got {len(outputs)} outputs for {len(ground_truths)} ground truths"
        )
    if ids is None:
        width = max(4, len(str(len(outputs))))
        ids = [f"{i:0{width}d}" for i in range(len(outputs))]
    elif len(ids) != len(outputs):
        raise ValueError(f"got {len(ids)} ids for {len(outputs)} outputs")
    rows = sorted(
        (str(i), psnr(out, ref), ssim(out, ref))
        for i, out, ref in zip(ids, outputs, ground_truths)
    )
    n = len(rows)
    mean_psnr = sum(r[1] for r in rows) / n if n else 0.0
    mean_ssim = sum(r[2] for r in rows) / n if n else 0.0
    return QualityReport(per_image=tuple(rows), mean_psnr_db=mean_psnr, mean_ssim=mean_ssim)


def write_report_csv(report: QualityReport, path: str | Path) -> None:
    """Write `id,psnr_db,ssim` rows with a final mean row, 6 decimals."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "psnr_db", "ssim"])
        for image_id, p, s in report.per_image:
            writer.writerow([image_id, f"{p:.6f}", f"{s:.6f}"])
        writer.writerow(["mean", f"{report.mean_psnr_db:.6f}", f"{report.mean_ssim:.6f}"])


def read_report_csv(path: str | Path) -> QualityReport:
    """Parse a report written by write_report_csv."""
    rows: list[tuple[str, float, float]] = []
    mean_psnr = mean_ssim = 0.0
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["id", "psnr_db", "ssim"]:
            raise ValueError(f"{path}: unexpected header {header}")
        for record in reader:
            if record[0] == "mean":
                mean_psnr, mean_ssim = float(record[1]), float(record[2])
            else:
                rows.append((record[0], float(record[1]), float(record[2])))
    return QualityReport(per_image=tuple(rows), mean_psnr_db=mean_psnr, mean_ssim=mean_ssim)
