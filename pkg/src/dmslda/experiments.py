"""Synthetic Gaussian studies comparing local, distributed, centralized and oracle fits."""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
import time
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .classifier import fit_reduced_lda, model_from_projected, predict_batch
from .core import (
    ClassSummaries,
    DimensionTooSmall,
    LabeledDataset,
    LengthMismatch,
    ShapeMismatch,
    ZeroProjection,
)
from .csl import GridConfig, gather_projected_stats, in_memory_links, lambda_grid, run_dmslda
from .oracle import oracle_discriminant, population_mean_diffs
from .solver import SolverConfig, solve_path
from .summaries import average_summaries, compute_class_summaries, local_loss

logger = logging.getLogger(__name__)

METHODS = ("local", "dmslda", "centralized", "oracle")
CSV_FIELDS = (
    "seed", "sigma", "b", "M", "K", "d", "method", "round", "lambda",
    "l22_error", "l11_error", "mcr", "payload_bytes", "wall_ms",
)


@dataclass(frozen=True)
class ExperimentSetting:
    """One simulation configuration.

    ``family`` is ``"multiclass"`` (three classes, means on coordinates 1-6)
    or ``"binary"`` (two classes, ``+-0.5`` on coordinates 1-10).
    """

    K: int = 3
    d: int = 400
    b: int = 70
    M: int = 20
    sigma_param: float = 0.5
    T: int = 3
    repetitions: int = 10
    test_per_class: int = 300
    seed: int = 0
    methods: tuple = METHODS
    family: str = "multiclass"
    grid: GridConfig = GridConfig()
    cv_folds: int = 5

    def __post_init__(self):
        for name in ("K", "d", "b", "M", "repetitions", "test_per_class"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        if not 0 <= self.sigma_param < 1:
            raise ValueError("sigma_param must lie in [0, 1)")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")


def multiclass_setting(**kw) -> ExperimentSetting:
    return ExperimentSetting(**{"K": 3, "d": 400, "family": "multiclass", **kw})


def binary_setting(**kw) -> ExperimentSetting:
    base = {"K": 2, "d": 200, "b": 200, "sigma_param": 0.8, "family": "binary"}
    return ExperimentSetting(**{**base, **kw})


def ar1_covariance(d: int, sigma_param: float) -> np.ndarray:
    """``Sigma_ij = sigma**|i - j|`` with ``0**0 = 1``."""
    if not 0 <= sigma_param < 1:
        raise ValueError("sigma_param must lie in [0, 1)")
    lags = np.abs(np.subtract.outer(np.arange(d), np.arange(d)))
    # numpy already evaluates 0.0**0 as 1.0
    return np.power(float(sigma_param), lags)


def family_means(setting: ExperimentSetting) -> np.ndarray:
    """Class means of the two simulation families, zero-padded to ``d``."""
    d = setting.d
    if setting.family == "multiclass":
        if d < 6:
            raise DimensionTooSmall("the multiclass family needs d >= 6")
        means = np.zeros((3, d))
        means[0, :3] = -2.0
        means[1, 3:6] = 2.0
        return means
    if setting.family == "binary":
        if d < 10:
            raise DimensionTooSmall("the binary family needs d >= 10")
        means = np.zeros((2, d))
        means[0, :10] = 0.5
        means[1] = -means[0]
        return means
    raise ValueError(f"unknown family {setting.family!r}")


def _sample(mean: np.ndarray, chol: np.ndarray, count: int, seed: int, key: tuple) -> np.ndarray:
    # PCG64 stream keyed by (seed, machine, class); machine 0 is the test set
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))
    z = rng.standard_normal((count, mean.size))
    return mean + z @ chol.T


def _dataset(means, chol, per_class, seed, machine) -> LabeledDataset:
    K = means.shape[0]
    blocks = [_sample(means[k], chol, per_class, seed, (machine, k)) for k in range(K)]
    labels = np.repeat(np.arange(1, K + 1), per_class)
    return LabeledDataset(np.vstack(blocks), labels, K)


def generate_shards(setting: ExperimentSetting, seed: int) -> tuple[list[LabeledDataset], LabeledDataset]:
    """Balanced training shards for machines ``1..M`` and a balanced test set."""
    sigma = ar1_covariance(setting.d, setting.sigma_param)
    chol = linalg.cholesky(sigma, lower=True)
    means = family_means(setting)
    shards = [_dataset(means, chol, setting.b, seed, m) for m in range(1, setting.M + 1)]
    test = _dataset(means, chol, setting.test_per_class, seed, 0)
    return shards, test


def l22_error(w: np.ndarray, w_star: np.ndarray) -> float:
    if np.shape(w) != np.shape(w_star):
        raise ShapeMismatch(f"{np.shape(w)} vs {np.shape(w_star)}")
    return float(np.linalg.norm(np.asarray(w) - w_star))


def l11_error(w: np.ndarray, w_star: np.ndarray) -> float:
    if np.shape(w) != np.shape(w_star):
        raise ShapeMismatch(f"{np.shape(w)} vs {np.shape(w_star)}")
    return float(np.abs(np.asarray(w) - w_star).sum())


def misclassification_rate(labels_pred, labels_true) -> float:
    pred = np.asarray(labels_pred)
    true = np.asarray(labels_true)
    if pred.shape != true.shape:
        raise LengthMismatch(f"{pred.shape} vs {true.shape}")
    if pred.size == 0:
        return 0.0
    return float(np.mean(pred != true))


def population_summaries(setting: ExperimentSetting) -> ClassSummaries:
    """Exact population statistics under balanced priors."""
    means = family_means(setting)
    K = setting.K
    counts = np.full(K, setting.b)
    return ClassSummaries(
        class_means=means,
        class_counts=counts,
        pooled_cov=ar1_covariance(setting.d, setting.sigma_param),
        mean_diffs=population_mean_diffs(means, np.full(K, 1.0 / K)),
        total_count=int(counts.sum()),
    )


def centralized_fit(
    parts: Sequence[ClassSummaries],
    grid: GridConfig = GridConfig(),
    folds: int = 5,
    cfg: SolverConfig = SolverConfig(),
) -> tuple[np.ndarray, float]:
    """Penalized fit on averaged statistics, penalty chosen by cross-validation over machines.

    Machines are dealt round-robin into ``min(folds, M)`` folds; each
    penalty is scored by the held-out loss of fits on the remaining folds.
    With one machine there is nothing to hold out and the smallest penalty
    is used.
    """
    full = average_summaries(parts)
    lams = lambda_grid(full.mean_diffs, grid.size, grid.ratio)
    path = [r.solution for r in solve_path(full.pooled_cov, full.mean_diffs, lams, cfg)]
    M = len(parts)
    if M == 1:
        return path[-1], lams[-1]
    nfold = min(folds, M)
    cv = np.zeros(len(lams))
    for f in range(nfold):
        train = average_summaries([p for m, p in enumerate(parts) if m % nfold != f])
        held = [p for m, p in enumerate(parts) if m % nfold == f]
        sols = solve_path(train.pooled_cov, train.mean_diffs, lams, cfg)
        cv += [sum(local_loss(h, r.solution) for h in held) for r in sols]
    i = int(np.argmin(cv))
    return path[i], lams[i]


def _mcr(w: np.ndarray, summ: ClassSummaries, test: LabeledDataset) -> float:
    try:
        model = fit_reduced_lda(w, summ)
    except ZeroProjection:
        # an all-zero projection carries no information; predict by prior
        return misclassification_rate(np.full(test.n, int(np.argmax(summ.class_counts)) + 1), test.labels)
    return misclassification_rate(predict_batch(model, test.features), test.labels)


@dataclass
class MethodRecord:
    method: str
    w: np.ndarray
    round: int | None
    lam: float | None
    l22_error: float
    l11_error: float
    mcr: float
    payload_bytes: int
    wall_ms: float
    extra: dict = dataclasses.field(default_factory=dict)


def run_trial(setting: ExperimentSetting, seed: int, cfg: SolverConfig = SolverConfig()) -> dict:
    """Generate one data set and fit every requested method on it."""
    shards, test = generate_shards(setting, seed)
    parts = [compute_class_summaries(s) for s in shards]
    pop = population_summaries(setting)
    w_star = oracle_discriminant(pop.pooled_cov, pop.mean_diffs)
    d, q, M = setting.d, setting.K - 1, setting.M
    records = {}

    def add(method, w, rnd, lam, mcr, nbytes, t0, **extra):
        records[method] = MethodRecord(
            method, w, rnd, lam, l22_error(w, w_star), l11_error(w, w_star), mcr, nbytes,
            (time.perf_counter() - t0) * 1e3, extra,
        )

    if "local" in setting.methods:
        t0 = time.perf_counter()
        # the local fit is round 0 of the distributed run without any follow-up rounds
        res = run_dmslda(parts[0], in_memory_links(parts[1:]), rounds=0, grid=setting.grid, cfg=cfg)
        w = res.chosen
        add("local", w, 0, res.chosen_lambda, _mcr(w, parts[0], test), res.ledger.payload_bytes, t0)

    if "dmslda" in setting.methods:
        t0 = time.perf_counter()
        links = in_memory_links(parts[1:])
        res = run_dmslda(parts[0], links, rounds=setting.T, grid=setting.grid, cfg=cfg)
        w = res.chosen
        ledger = res.ledger
        if np.any(w):
            model = gather_projected_stats(parts[0], links, w, round=setting.T, ledger=ledger)
            mcr = misclassification_rate(predict_batch(model, test.features), test.labels)
        else:
            mcr = _mcr(w, parts[0], test)
        add(
            "dmslda", w, res.chosen_round, res.chosen_lambda, mcr, ledger.payload_bytes, t0,
            history=res.history, ledger=ledger,
        )

    if "centralized" in setting.methods:
        t0 = time.perf_counter()
        w, lam = centralized_fit(parts, setting.grid, setting.cv_folds, cfg)
        # each worker ships its covariance and mean differences
        nbytes = (M - 1) * 8 * (d * d + d * q)
        add("centralized", w, None, lam, _mcr(w, average_summaries(parts), test), nbytes, t0)

    if "oracle" in setting.methods:
        t0 = time.perf_counter()
        model = model_from_projected(
            w_star, pop.class_means @ w_star, w_star.T @ pop.pooled_cov @ w_star, pop.class_counts
        )
        mcr = misclassification_rate(predict_batch(model, test.features), test.labels)
        add("oracle", w_star, None, None, mcr, 0, t0)
    return records


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def run_sweep(
    settings: Iterable[ExperimentSetting],
    seeds: Sequence[int] | None = None,
    out=None,
    timing: bool = False,
    cfg: SolverConfig = SolverConfig(),
) -> str:
    """Run every setting over its seeds and return (and optionally write) the CSV text.

    ``seeds`` defaults to ``setting.seed + r`` for ``r < repetitions``.
    Rows are ordered by setting, seed and method, followed by ``mean`` and
    ``std`` rows per setting and method. ``wall_ms`` is left empty unless
    ``timing`` is set, so equal inputs give byte-identical output.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for setting in settings:
        run_seeds = list(seeds) if seeds is not None else [
            setting.seed + r for r in range(setting.repetitions)
        ]
        base = [setting.sigma_param, setting.b, setting.M, setting.K, setting.d]
        collected = {m: [] for m in setting.methods}
        for seed in run_seeds:
            try:
                recs = run_trial(setting, seed, cfg)
            except Exception as exc:
                raise RuntimeError(f"trial failed for {setting} seed={seed}") from exc
            for method in setting.methods:
                r = recs[method]
                collected[method].append(r)
                writer.writerow([_fmt(v) for v in [
                    seed, *base, method, r.round, r.lam, r.l22_error, r.l11_error, r.mcr,
                    r.payload_bytes, r.wall_ms if timing else None,
                ]])
        for method in setting.methods:
            rs = collected[method]
            cols = np.array([[r.l22_error, r.l11_error, r.mcr, r.payload_bytes] for r in rs])
            for stat, fn in (("mean", np.mean), ("std", np.std)):
                vals = fn(cols, axis=0)
                writer.writerow([_fmt(v) for v in [
                    stat, *base, method, None, None, *vals[:3], vals[3], None,
                ]])
        logger.info("finished %s", setting)
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return text


def desk_settings(family: str, seed: int = 0) -> list[ExperimentSetting]:
    """Reduced sweep: 10 repetitions and fewer machines."""
    if family == "multiclass":
        return [
            multiclass_setting(sigma_param=s, b=b, M=M, repetitions=10, seed=seed)
            for s, b in ((0.0, 70), (0.5, 70), (0.8, 140))
            for M in (5, 10, 20)
        ]
    if family == "binary":
        return [
            binary_setting(M=M, repetitions=10, seed=seed, methods=("dmslda", "centralized", "oracle"))
            for M in (5, 10)
        ]
    raise ValueError(f"unknown family {family!r}")


def full_settings(family: str, seed: int = 0) -> list[ExperimentSetting]:
    """Full sweep: 40 repetitions over the published machine counts."""
    if family == "multiclass":
        return [
            multiclass_setting(sigma_param=s, b=b, M=M, repetitions=40, seed=seed)
            for s, b in ((0.0, 70), (0.5, 70), (0.8, 140))
            for M in (20, 30, 40, 50, 60)
        ]
    if family == "binary":
        return [
            binary_setting(M=M, repetitions=40, seed=seed, methods=("dmslda", "centralized", "oracle"))
            for M in (5, 10, 15, 20, 30)
        ]
    raise ValueError(f"unknown family {family!r}")
