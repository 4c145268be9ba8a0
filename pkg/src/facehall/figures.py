"""Matplotlib rendering of experiment reports to image files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def plot_iteration_curve(mean_psnr_per_iteration: Sequence[float], path: str | Path) -> None:
    """Mean PSNR across reproducing-learning iterations."""
    iterations = range(len(mean_psnr_per_iteration))
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(iterations, mean_psnr_per_iteration, marker="o")
    ax.set_xlabel("reproducing-learning iteration")
    ax.set_ylabel("mean PSNR (dB)")
    ax.set_xticks(list(iterations))
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_sweep_trend(
    values: Sequence[float],
    series: dict[str, Sequence[float]],
    xlabel: str,
    ylabel: str,
    path: str | Path,
) -> None:
    """One line per named series over the sweep values."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for label, ys in series.items():
        ax.plot(values, ys, marker="o", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(series) > 1:
        ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
