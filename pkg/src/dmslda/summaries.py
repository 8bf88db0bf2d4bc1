"""Sufficient statistics for the discriminant losses and their aggregation."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .core import (
    ClassSummaries,
    DegenerateNormalization,
    LabeledDataset,
    MissingClass,
    ShapeMismatch,
)


def mean_diffs_from_means(class_means: np.ndarray, class_counts: np.ndarray) -> np.ndarray:
    """Columns ``mu_k - mu_bar`` for ``k = 1..K-1`` with the count-weighted overall mean."""
    weights = class_counts / class_counts.sum()
    overall = weights @ class_means
    return (class_means[:-1] - overall).T


def compute_class_summaries(data: LabeledDataset) -> ClassSummaries:
    """Class means, counts, the ``1/(n-K)`` pooled covariance and mean differences."""
    K = data.num_classes
    counts = data.class_counts()
    if np.any(counts < 2):
        missing = [k + 1 for k in np.flatnonzero(counts < 2)]
        raise MissingClass(f"classes {missing} have fewer than 2 samples")
    if data.n <= K:
        raise DegenerateNormalization(f"need n > K, got n={data.n}, K={K}")

    x = data.features
    idx = data.labels - 1
    sums = np.zeros((K, data.d))
    np.add.at(sums, idx, x)
    means = sums / counts[:, None]
    resid = x - means[idx]
    cov = resid.T @ resid / (data.n - K)
    cov = 0.5 * (cov + cov.T)
    return ClassSummaries(
        class_means=means,
        class_counts=counts,
        pooled_cov=cov,
        mean_diffs=mean_diffs_from_means(means, counts),
        total_count=data.n,
    )


def average_summaries(parts: Sequence[ClassSummaries]) -> ClassSummaries:
    """Aggregate per-machine statistics.

    Covariances and mean differences are averaged with equal machine
    weights; class means are pooled by count.
    """
    if not parts:
        raise ValueError("need at least one part")
    first = parts[0]
    for p in parts[1:]:
        if p.class_means.shape != first.class_means.shape:
            raise ShapeMismatch(
                f"inconsistent (K, d): {p.class_means.shape} vs {first.class_means.shape}"
            )
    if len(parts) == 1:
        return first
    counts = np.sum([p.class_counts for p in parts], axis=0)
    means = np.sum([p.class_means * p.class_counts[:, None] for p in parts], axis=0)
    means = means / counts[:, None]
    cov = np.mean([p.pooled_cov for p in parts], axis=0)
    return ClassSummaries(
        class_means=means,
        class_counts=counts,
        pooled_cov=0.5 * (cov + cov.T),
        mean_diffs=np.mean([p.mean_diffs for p in parts], axis=0),
        total_count=sum(p.total_count for p in parts),
    )


def _check_w(summ: ClassSummaries, w: np.ndarray) -> None:
    if w.shape != summ.mean_diffs.shape:
        raise ShapeMismatch(f"W has shape {w.shape}, expected {summ.mean_diffs.shape}")


def local_loss(summ: ClassSummaries, w: np.ndarray) -> float:
    """``0.5 <W, S W> - <W, U>`` for one machine's statistics."""
    w = np.asarray(w, dtype=np.float64)
    _check_w(summ, w)
    return float(0.5 * np.vdot(w, summ.pooled_cov @ w) - np.vdot(w, summ.mean_diffs))


def local_gradient(summ: ClassSummaries, w: np.ndarray) -> np.ndarray:
    """``S W - U``, the gradient of :func:`local_loss`."""
    w = np.asarray(w, dtype=np.float64)
    _check_w(summ, w)
    return summ.pooled_cov @ w - summ.mean_diffs
