"""Gaussian LDA on projected data ``W^T x``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import ClassSummaries, ShapeMismatch, SingularProjection, ZeroProjection

RIDGE_SCALE = 1e-8


@dataclass(frozen=True, eq=False)
class ReducedLdaModel:
    """LDA in the ``K - 1`` dimensional projected space.

    Attributes
    ----------
    projection : (d, K - 1) discriminant matrix.
    proj_means : (K, K - 1) projected class centroids.
    proj_cov : (K - 1, K - 1) projected pooled covariance, ridge included.
    log_priors : (K,) log class proportions.
    """

    projection: np.ndarray
    proj_means: np.ndarray
    proj_cov: np.ndarray
    log_priors: np.ndarray

    def __post_init__(self):
        for name in ("projection", "proj_means", "proj_cov", "log_priors"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        q = self.projection.shape[1]
        if self.proj_means.shape[1] != q or self.proj_cov.shape != (q, q):
            raise ShapeMismatch("projected statistics do not match the projection width")
        if self.log_priors.shape != (self.proj_means.shape[0],):
            raise ShapeMismatch("one log prior per class is required")
        try:
            chol = linalg.cho_factor(self.proj_cov, lower=True)
        except linalg.LinAlgError as exc:
            raise SingularProjection(f"projected covariance is singular: {exc}") from exc
        # cached S^{-1} m_k and the constant terms of the discriminant scores
        coef = linalg.cho_solve(chol, self.proj_means.T)
        const = -0.5 * np.einsum("kj,jk->k", self.proj_means, coef) + self.log_priors
        object.__setattr__(self, "_coef", coef)
        object.__setattr__(self, "_const", const)

    @property
    def d(self) -> int:
        return self.projection.shape[0]

    def scores(self, xs: np.ndarray) -> np.ndarray:
        """Discriminant scores ``delta_k``, shape ``(n, K)``."""
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[1] != self.d:
            raise ShapeMismatch(f"expected (n, {self.d}) inputs, got {xs.shape}")
        return (xs @ self.projection) @ self._coef + self._const


def model_from_projected(
    w: np.ndarray,
    proj_means: np.ndarray,
    proj_cov: np.ndarray,
    class_counts: np.ndarray,
) -> ReducedLdaModel:
    """Build the reduced model from already projected statistics.

    Adds the ridge ``1e-8 * trace(S) / (K - 1)`` to the projected covariance.
    """
    proj_cov = np.asarray(proj_cov, dtype=np.float64)
    proj_cov = 0.5 * (proj_cov + proj_cov.T)
    q = proj_cov.shape[0]
    eps = RIDGE_SCALE * np.trace(proj_cov) / q
    counts = np.asarray(class_counts, dtype=np.float64)
    return ReducedLdaModel(
        projection=w,
        proj_means=proj_means,
        proj_cov=proj_cov + eps * np.eye(q),
        log_priors=np.log(counts / counts.sum()),
    )


def fit_reduced_lda(w: np.ndarray, summ: ClassSummaries) -> ReducedLdaModel:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != summ.mean_diffs.shape:
        raise ShapeMismatch(f"W has shape {w.shape}, expected {summ.mean_diffs.shape}")
    if not np.any(w):
        raise ZeroProjection("cannot classify with an all-zero projection")
    return model_from_projected(
        w, summ.class_means @ w, w.T @ summ.pooled_cov @ w, summ.class_counts
    )


def predict_batch(model: ReducedLdaModel, xs: np.ndarray) -> np.ndarray:
    """Labels in ``1..K``; ties go to the smallest class index."""
    return np.argmax(model.scores(xs), axis=1) + 1


def predict(model: ReducedLdaModel, x: np.ndarray) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.d,):
        raise ShapeMismatch(f"expected a length-{model.d} vector, got {x.shape}")
    return int(predict_batch(model, x[None, :])[0])
