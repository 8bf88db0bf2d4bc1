"""Population-level ground truth and subspace comparison."""

from __future__ import annotations

import numpy as np
from scipy import linalg

from .core import RankDeficientInput, SingularCovariance

RANK_RTOL = 1e-10


def _cholesky(sigma: np.ndarray):
    try:
        return linalg.cho_factor(np.asarray(sigma, dtype=np.float64), lower=True)
    except linalg.LinAlgError as exc:
        raise SingularCovariance(f"covariance is not positive definite: {exc}") from exc


def oracle_discriminant(sigma: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``Sigma^{-1} U`` by a Cholesky solve."""
    return linalg.cho_solve(_cholesky(sigma), np.asarray(u, dtype=np.float64))


def population_mean_diffs(means: np.ndarray, priors: np.ndarray) -> np.ndarray:
    """``(mu_1 - mu_bar, ..., mu_{K-1} - mu_bar)`` with prior-weighted ``mu_bar``."""
    means = np.asarray(means, dtype=np.float64)
    overall = np.asarray(priors, dtype=np.float64) @ means
    return (means[:-1] - overall).T


def between_class_cov(means: np.ndarray, priors: np.ndarray) -> np.ndarray:
    means = np.asarray(means, dtype=np.float64)
    priors = np.asarray(priors, dtype=np.float64)
    centered = means - priors @ means
    return (centered * priors[:, None]).T @ centered


def _inv_sqrt(sigma: np.ndarray) -> np.ndarray:
    vals, vecs = linalg.eigh(sigma)
    if vals[0] <= 0:
        raise SingularCovariance("covariance is not positive definite")
    return (vecs / np.sqrt(vals)) @ vecs.T


def fisher_subspace(sigma: np.ndarray, means: np.ndarray, priors: np.ndarray) -> np.ndarray:
    """Orthonormal basis of Fisher's discriminant subspace via the whitened eigenproblem.

    Returns a ``(d, q)`` array with ``q`` the numerical rank of the
    between-class covariance (possibly zero).
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    _cholesky(sigma)
    root = _inv_sqrt(sigma)
    b = between_class_cov(means, priors)
    a = root @ b @ root
    a = 0.5 * (a + a.T)
    vals, vecs = linalg.eigh(a)
    top = vals.max(initial=0.0)
    if top <= 0:
        return np.zeros((sigma.shape[0], 0))
    keep = vals > RANK_RTOL * top
    basis = root @ vecs[:, keep]
    q, _ = np.linalg.qr(basis)
    return q


def _orthonormal(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] == 0:
        raise RankDeficientInput(f"{name} must have at least one column")
    q, r = np.linalg.qr(a)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-12 * max(diag.max(), np.finfo(float).tiny):
        raise RankDeficientInput(f"{name} columns are linearly dependent")
    return q


def principal_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Principal angles in radians between ``span(a)`` and ``span(b)``, largest first.

    Cosines come from the singular values of the cross-Gram matrix. Small
    angles are recovered from sines instead, since ``arccos`` cannot
    resolve angles below about 1e-8 in double precision.
    """
    qa = _orthonormal(a, "a")
    qb = _orthonormal(b, "b")
    if qa.shape[1] < qb.shape[1]:
        qa, qb = qb, qa
    cross = qa.T @ qb
    cos = np.clip(linalg.svdvals(cross), 0.0, 1.0)
    resid = qb - qa @ cross
    sin = np.clip(linalg.svdvals(resid), 0.0, 1.0)
    # sines come out in descending order, cosines descending -> pair by reversal
    sin = np.sort(sin)
    angles = np.where(cos**2 <= 0.5, np.arccos(cos), np.arcsin(sin))
    return np.clip(np.sort(angles)[::-1], 0.0, np.pi / 2)
