"""Shared domain types and errors.

Conventions used throughout the package:

* matrices are C-ordered ``float64`` arrays, one sample per row;
* class labels are 1-based (``1..K``) and class index order defines the
  order of every per-class quantity (rows of the class means, columns of
  the mean-difference matrix);
* a discriminant matrix ``W`` is a plain ``(d, K - 1)`` array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SYMMETRY_RTOL = 1e-12


class DmsldaError(Exception):
    """Base class for every error raised by this package."""


class ShapeMismatch(DmsldaError, ValueError):
    pass


class MissingClass(DmsldaError, ValueError):
    pass


class DegenerateNormalization(DmsldaError, ValueError):
    pass


class NonFinite(DmsldaError, FloatingPointError):
    pass


class ZeroLinearTerm(DmsldaError, ValueError):
    pass


class ZeroProjection(DmsldaError, ValueError):
    pass


class SingularProjection(DmsldaError, np.linalg.LinAlgError):
    pass


class SingularCovariance(DmsldaError, np.linalg.LinAlgError):
    pass


class RankDeficientInput(DmsldaError, ValueError):
    pass


class DimensionTooSmall(DmsldaError, ValueError):
    pass


class LengthMismatch(DmsldaError, ValueError):
    pass


class TransportFailure(DmsldaError, ConnectionError):
    """A protocol message could not be delivered or decoded.

    ``peer`` names the endpoint and ``kind`` the message being exchanged.
    """

    def __init__(self, message: str, peer: str | None = None, kind: str | None = None):
        super().__init__(message)
        self.peer = peer
        self.kind = kind

    def __str__(self) -> str:
        base = super().__str__()
        extra = [f"{k}={v}" for k, v in (("peer", self.peer), ("kind", self.kind)) if v]
        return f"{base} ({', '.join(extra)})" if extra else base


class NotConvergedWarning(RuntimeWarning):
    """Emitted when a solve stops at its iteration budget."""


def _frozen(a, dtype=np.float64) -> np.ndarray:
    out = np.array(a, dtype=dtype, order="C", copy=True)
    out.setflags(write=False)
    return out


def is_symmetric(a: np.ndarray, rtol: float = SYMMETRY_RTOL) -> bool:
    scale = max(float(np.max(np.abs(a), initial=0.0)), 1.0)
    return bool(np.max(np.abs(a - a.T), initial=0.0) <= rtol * scale)


def check_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise NonFinite(f"{what} contains non-finite entries")


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Samples held by one machine.

    ``features`` is ``(n, d)``; ``labels`` holds integers in ``1..num_classes``.
    """

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        x = _frozen(self.features)
        y = _frozen(self.labels, dtype=np.int64)
        if x.ndim != 2:
            raise ShapeMismatch(f"features must be 2-D, got shape {x.shape}")
        check_finite(x, "features")
        if y.shape != (x.shape[0],):
            raise ShapeMismatch(f"labels shape {y.shape} does not match {x.shape[0]} samples")
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        if y.size and (y.min() < 1 or y.max() > self.num_classes):
            raise ValueError(f"labels must lie in 1..{self.num_classes}")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels - 1, minlength=self.num_classes)


@dataclass(frozen=True, eq=False)
class ClassSummaries:
    """Per-machine sufficient statistics.

    Attributes
    ----------
    class_means : (K, d) array, row ``k`` is the mean of class ``k + 1``.
    class_counts : (K,) int array.
    pooled_cov : (d, d) pooled within-class covariance.
    mean_diffs : (d, K - 1) array of class mean minus overall mean, first
        ``K - 1`` classes.
    total_count : number of samples summarized.
    """

    class_means: np.ndarray
    class_counts: np.ndarray
    pooled_cov: np.ndarray
    mean_diffs: np.ndarray
    total_count: int

    def __post_init__(self):
        means = _frozen(self.class_means)
        counts = _frozen(self.class_counts, dtype=np.int64)
        cov = _frozen(self.pooled_cov)
        diffs = _frozen(self.mean_diffs)
        if means.ndim != 2:
            raise ShapeMismatch("class_means must be 2-D")
        k, d = means.shape
        if counts.shape != (k,):
            raise ShapeMismatch(f"class_counts shape {counts.shape}, expected ({k},)")
        if cov.shape != (d, d):
            raise ShapeMismatch(f"pooled_cov shape {cov.shape}, expected ({d}, {d})")
        if diffs.shape != (d, k - 1):
            raise ShapeMismatch(f"mean_diffs shape {diffs.shape}, expected ({d}, {k - 1})")
        if int(counts.sum()) != int(self.total_count):
            raise ValueError("class_counts must sum to total_count")
        if not is_symmetric(cov):
            raise ValueError("pooled_cov is not symmetric")
        object.__setattr__(self, "class_means", means)
        object.__setattr__(self, "class_counts", counts)
        object.__setattr__(self, "pooled_cov", cov)
        object.__setattr__(self, "mean_diffs", diffs)
        object.__setattr__(self, "total_count", int(self.total_count))

    @property
    def d(self) -> int:
        return self.class_means.shape[1]

    @property
    def num_classes(self) -> int:
        return self.class_means.shape[0]


@dataclass(frozen=True, eq=False)
class QuadraticProblem:
    """``min_W 0.5 <W, quad W> - <W, linear> + lam * ||W||_1``."""

    quad: np.ndarray
    linear: np.ndarray
    lam: float

    def __post_init__(self):
        a = _frozen(self.quad)
        c = _frozen(self.linear)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ShapeMismatch(f"quad must be square, got {a.shape}")
        if c.ndim != 2 or c.shape[0] != a.shape[0]:
            raise ShapeMismatch(f"linear shape {c.shape} incompatible with quad {a.shape}")
        check_finite(a, "quad")
        check_finite(c, "linear")
        if not is_symmetric(a):
            raise ValueError("quad is not symmetric")
        lam = float(self.lam)
        if not lam >= 0.0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        object.__setattr__(self, "quad", a)
        object.__setattr__(self, "linear", c)
        object.__setattr__(self, "lam", lam)

    @property
    def shape(self) -> tuple[int, int]:
        return self.linear.shape


@dataclass(frozen=True, eq=False)
class SolveReport:
    solution: np.ndarray
    iterations: int
    final_objective: float
    kkt_residual: float
    converged: bool
