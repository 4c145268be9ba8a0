"""Thresholding locality-constrained patch representation.

Selects the K nearest candidate patches, solves the sum-to-one
locality-regularized least-squares system in closed form, and combines the
selected HR residual patches with the resulting coefficients. The
unthresholded solver over all candidates is kept for baseline and
equivalence checks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


class DegenerateSolutionError(RuntimeError):
    """The closed-form system failed or its solution cannot be rescaled."""


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the thresholding locality-constrained solver.

    tau:       locality regularization strength
    k:         number of nearest candidates kept (clamped to N at solve time)
    ridge_eps: relative diagonal stabilizer; ridge_eps * trace(GtG) / K is
               added to the normal-equations diagonal
    """

    tau: float = 0.04
    k: int = 360
    ridge_eps: float = 1e-8

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.ridge_eps < 0:
            raise ValueError(f"ridge_eps must be >= 0, got {self.ridge_eps}")


@dataclass(frozen=True)
class RepresentationWeights:
    """Selected candidate indices and their sum-to-one coefficients."""

    indices: np.ndarray
    coefficients: np.ndarray


def select_knn(distances: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest distances, sorted by (distance, index).

    Ties break toward the lower candidate index. k larger than the number of
    candidates is clamped with a warning.
    """
    d = np.asarray(distances, dtype=np.float64)
    if d.ndim != 1 or d.size == 0:
        raise ValueError("distances must be a non-empty 1D array")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > d.size:
        logger.warning("k=%d exceeds candidate count %d; clamping", k, d.size)
        k = d.size
    if k == d.size:
        return np.argsort(d, kind="stable")
    part = np.argpartition(d, k - 1)[:k]
    return part[np.lexsort((part, d[part]))]


def _solve_rescaled(
    test_values: np.ndarray,
    candidate_features: np.ndarray,
    distances: np.ndarray,
    tau: float,
    ridge_eps: float,
) -> np.ndarray:
    """Closed-form sum-to-one coefficients for the given candidates.

    Solves (GtG + tau * D^2 + ridge * I) u = 1 with G columns
    test - candidate_k and D = diag(distances), then rescales u to sum 1.
    """
    x = np.asarray(test_values, dtype=np.float64)
    cands = np.atleast_2d(np.asarray(candidate_features, dtype=np.float64))
    d = np.asarray(distances, dtype=np.float64)
    k = cands.shape[0]
    if cands.shape[1] != x.size:
        raise ValueError(
            f"candidate dimension {cands.shape[1]} does not match test dimension {x.size}"
        )
    if d.size != k:
        raise ValueError(f"got {d.size} distances for {k} candidates")

    diff = x[None, :] - cands  # rows are G columns
    system = diff @ diff.T
    trace = np.trace(system)
    idx = np.arange(k)
    system[idx, idx] += tau * d * d + ridge_eps * trace / k
    try:
        u = np.linalg.solve(system, np.ones(k))
    except np.linalg.LinAlgError as exc:
        raise DegenerateSolutionError(f"linear solve failed: {exc}") from exc
    if not np.all(np.isfinite(u)):
        raise DegenerateSolutionError("linear solve produced non-finite values")
    total = u.sum()
    if abs(total) < 1e-12:
        raise DegenerateSolutionError(f"coefficient sum {total:.3e} too small to rescale")
    return u / total


def solve_weights(
    test_feature: np.ndarray,
    candidate_features: np.ndarray,
    distances: np.ndarray,
    config: SolverConfig,
    indices: np.ndarray | None = None,
) -> RepresentationWeights:
    """Sum-to-one coefficients for K pre-selected candidates.

    candidate_features holds the K selected feature vectors (row-wise) and
    distances their precomputed distances to the test feature. indices maps
    the rows back into the full candidate set; it defaults to 0..K-1.
    Raises DegenerateSolutionError when the system cannot be solved or
    rescaled; callers fall back to uniform weights.
    """
    coeffs = _solve_rescaled(
        test_feature, candidate_features, distances, config.tau, config.ridge_eps
    )
    if indices is None:
        indices = np.arange(coeffs.size)
    return RepresentationWeights(indices=np.asarray(indices), coefficients=coeffs)


def solve_weights_full(
    test_feature: np.ndarray,
    candidate_features: np.ndarray,
    distances: np.ndarray,
    tau: float,
    ridge_eps: float = 1e-8,
) -> np.ndarray:
    """Unthresholded coefficients over every candidate (K = N)."""
    return _solve_rescaled(test_feature, candidate_features, distances, tau, ridge_eps)


def uniform_weights(indices: np.ndarray) -> RepresentationWeights:
    """Fallback representation: equal weight on every selected candidate."""
    indices = np.asarray(indices)
    k = indices.size
    return RepresentationWeights(indices=indices, coefficients=np.full(k, 1.0 / k))


def predict_hr_patch(weights: RepresentationWeights, candidate_hr: np.ndarray) -> np.ndarray:
    """Weighted sum of the selected HR residual patches.

    candidate_hr has shape (K, p, p) and is index-aligned with
    weights.coefficients.
    """
    hr = np.asarray(candidate_hr, dtype=np.float64)
    if hr.shape[0] != weights.coefficients.size:
        raise ValueError(
            f"{hr.shape[0]} patches for {weights.coefficients.size} coefficients"
        )
    return np.tensordot(weights.coefficients, hr, axes=1)


def contribution_ratio(
    coefficients: np.ndarray,
    position_patch_indices: np.ndarray,
    top_count: int,
) -> tuple[float, float]:
    """Share of position patches among the largest-magnitude coefficients.

    Ranks all candidates by absolute coefficient (descending, ties by lower
    index) and returns (position share, context share) of the first
    top_count entries. top_count is clamped to the candidate count.
    """
    coeffs = np.asarray(coefficients, dtype=np.float64)
    if top_count < 1:
        raise ValueError(f"top_count must be >= 1, got {top_count}")
    t = min(top_count, coeffs.size)
    order = np.argsort(-np.abs(coeffs), kind="stable")
    top = order[:t]
    hits = np.intersect1d(top, np.asarray(position_patch_indices)).size
    crpp = hits / t
    return crpp, 1.0 - crpp
