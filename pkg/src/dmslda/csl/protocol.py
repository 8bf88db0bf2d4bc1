"""Master side of the distributed estimator.

Machine 1 is the master: it holds its own summaries and solves every
penalized problem. Workers only return gradients and scalar losses, so a
session moves ``O(d K M)`` numbers instead of ``M`` full covariances.

Each round of a session uses the following exchanges with every worker:

* a *gradient exchange* (round ``t >= 1``) sends the previous model as the
  anchor and no candidates; the reply carries the worker's gradient and
  its loss at the anchor;
* a *selection exchange* sends the candidate solutions of the round's
  penalty grid; the reply carries one loss per candidate.

With a single candidate the selection exchange also uses that candidate
as its anchor, so the gradient for the next round arrives with the losses
and the next gradient exchange is skipped.
"""

from __future__ import annotations

import logging
import warnings
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..classifier import ReducedLdaModel, fit_reduced_lda, model_from_projected
from ..core import (
    ClassSummaries,
    NotConvergedWarning,
    QuadraticProblem,
    SolveReport,
    ShapeMismatch,
    TransportFailure,
    ZeroLinearTerm,
    ZeroProjection,
)
from ..solver import SolverConfig, lipschitz_upper_bound, solve_path
from ..summaries import local_gradient
from . import wire
from .transport import Link, in_memory_transport
from .worker import Worker

logger = logging.getLogger(__name__)


@dataclass
class CommLedger:
    """Counts every message body that crosses the master's links.

    ``messages_sent`` includes requests and replies; TCP framing and the
    connection handshake are not payload and are not counted.
    """

    messages_sent: int = 0
    payload_bytes: int = 0
    per_round: list = field(default_factory=list)

    def record(self, round: int, nbytes: int) -> None:
        self.messages_sent += 1
        self.payload_bytes += nbytes
        if self.per_round and self.per_round[-1][0] == round:
            self.per_round[-1] = (round, self.per_round[-1][1] + nbytes)
        else:
            self.per_round.append((round, nbytes))

    def round_bytes(self, round: int) -> int:
        return sum(b for r, b in self.per_round if r == round)


@dataclass(frozen=True)
class GridConfig:
    size: int = 10
    ratio: float = 0.7


@dataclass(frozen=True, eq=False)
class RoundRecord:
    round: int
    w: np.ndarray
    lam: float
    validation_loss: float


@dataclass(eq=False)
class DmsldaResult:
    chosen: np.ndarray
    history: list
    ledger: CommLedger

    @property
    def chosen_round(self) -> int:
        return int(np.argmin([h.validation_loss for h in self.history]))

    @property
    def chosen_lambda(self) -> float:
        return self.history[self.chosen_round].lam


def lambda_grid(c: np.ndarray, grid_size: int, ratio: float) -> list[float]:
    """Geometric grid ``lam_max * ratio**j`` starting at ``lam_max = max|C|``.

    ``lam_max`` is the smallest penalty whose solution is exactly zero.
    """
    if grid_size < 1:
        raise ValueError("grid_size must be >= 1")
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    lam_max = float(np.max(np.abs(c), initial=0.0))
    if lam_max == 0.0:
        raise ZeroLinearTerm("linear term is identically zero")
    return [lam_max * ratio**j for j in range(grid_size)]


def shifted_problem(
    master_summ: ClassSummaries,
    w_prev: np.ndarray,
    avg_gradient: np.ndarray,
    lam: float,
) -> QuadraticProblem:
    """Master loss with a linear correction matching the global average gradient at ``w_prev``.

    The objective ``L_1(W) + <g_bar - grad L_1(w_prev), W> + lam ||W||_1``
    becomes quadratic term ``S_1`` and linear term
    ``U_1 - (g_bar - grad L_1(w_prev))``.
    """
    w_prev = np.asarray(w_prev, dtype=np.float64)
    avg_gradient = np.asarray(avg_gradient, dtype=np.float64)
    shape = master_summ.mean_diffs.shape
    if w_prev.shape != shape or avg_gradient.shape != shape:
        raise ShapeMismatch(
            f"expected {shape} arrays, got {w_prev.shape} and {avg_gradient.shape}"
        )
    shift = avg_gradient - local_gradient(master_summ, w_prev)
    return QuadraticProblem(master_summ.pooled_cov, master_summ.mean_diffs - shift, lam)


def _pick(reports: Sequence[SolveReport], losses: np.ndarray | None) -> int:
    """Index of the selected candidate.

    Candidates whose solve hit the iteration budget are ineligible unless
    none converged: below some penalty the master's problem is unbounded
    when its covariance is singular, and a truncated iterate is not a fit.
    """
    ok = np.array([r.converged for r in reports])
    if not ok.any():
        ok[:] = True
    if losses is None:
        return int(np.flatnonzero(ok)[-1])
    # grids are descending, so argmin's first-hit rule prefers the larger penalty
    return int(np.argmin(np.where(ok, losses, np.inf)))


def _solve_candidates(a, c, lams, cfg, lip=None) -> list[SolveReport]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotConvergedWarning)
        reports = solve_path(a, c, lams, cfg, lip)
    failed = [lam for lam, r in zip(lams, reports) if not r.converged]
    if failed:
        logger.info(
            "%d of %d candidate solves did not converge (lambda <= %.4g) and are ineligible",
            len(failed), len(lams), max(failed),
        )
    return reports


Validator = Callable[[list], "np.ndarray | None"]


def local_init(
    master_summ: ClassSummaries,
    grid: Sequence[float],
    validator: Validator | None,
    cfg: SolverConfig = SolverConfig(),
) -> tuple[np.ndarray, float]:
    """Fit the master-only estimator over ``grid`` and keep the best by validation loss.

    ``validator`` maps a list of candidate models to their summed losses on
    the other machines, or returns None when there are none; the smallest
    penalty whose solve converged is then used.
    """
    if not grid:
        raise ValueError("grid must be nonempty")
    reports = _solve_candidates(master_summ.pooled_cov, master_summ.mean_diffs, grid, cfg)
    cands = [r.solution for r in reports]
    losses = validator(cands) if validator is not None else None
    i = _pick(reports, losses)
    return cands[i], float(grid[i])


class Session:
    """Sends requests to every worker and accounts for the bytes."""

    def __init__(self, links: Sequence[Link], ledger: CommLedger | None = None, parallel: bool = True):
        self.links = list(links)
        self.ledger = ledger if ledger is not None else CommLedger()
        self._pool = (
            ThreadPoolExecutor(max_workers=len(self.links))
            if parallel and len(self.links) > 1
            else None
        )

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def exchange(self, msg: wire.Message, expect: type) -> list:
        body = wire.encode(msg)

        def call(link):
            return link.request(body)

        if self._pool is not None:
            raw = list(self._pool.map(call, self.links))
        else:
            raw = [call(link) for link in self.links]
        replies = []
        for link, reply in zip(self.links, raw):
            self.ledger.record(msg.round, len(body))
            self.ledger.record(msg.round, len(reply))
            try:
                decoded = wire.decode(reply)
            except TransportFailure as exc:
                raise TransportFailure(str(exc), peer=link.name, kind=msg.kind.name) from exc
            if not isinstance(decoded, expect):
                raise TransportFailure(
                    f"expected {expect.__name__}, got {type(decoded).__name__}",
                    peer=link.name,
                    kind=msg.kind.name,
                )
            replies.append(decoded)
        return replies

    def score(self, round: int, candidates: Sequence[np.ndarray], anchor: np.ndarray | None):
        """Summed worker losses per candidate and, if ``anchor`` is given, summed gradients."""
        shape = candidates[0].shape if candidates else anchor.shape
        msg = wire.BroadcastCandidates(
            round, tuple(candidates), wire.empty_matrix() if anchor is None else anchor
        )
        replies = self.exchange(msg, wire.GradientAndLossReply)
        losses = np.zeros(len(candidates) + 1)
        grad = np.zeros(shape) if anchor is not None else None
        for link, rep in zip(self.links, replies):
            if rep.losses.shape != (len(candidates) + 1,):
                raise TransportFailure(
                    f"expected {len(candidates) + 1} losses, got {rep.losses.shape}",
                    peer=link.name,
                )
            losses = losses + rep.losses
            if anchor is not None:
                if rep.gradient.shape != shape:
                    raise ShapeMismatch(f"{link.name} sent a {rep.gradient.shape} gradient")
                grad = grad + rep.gradient
        return losses, grad


def validation_loss(w: np.ndarray, links: Sequence[Link], ledger: CommLedger | None = None) -> float:
    """Sum of the workers' local losses at ``w``."""
    if not links:
        raise ValueError("validation needs at least one worker")
    with Session(links, ledger) as session:
        losses, _ = session.score(0, [np.asarray(w, dtype=np.float64)], None)
    return float(losses[0])


def _grid_for(grid, t: int) -> GridConfig:
    if isinstance(grid, GridConfig):
        return grid
    return grid[t]


def run_dmslda(
    master: ClassSummaries,
    links: Sequence[Link],
    rounds: int = 3,
    grid: GridConfig | Sequence[GridConfig] = GridConfig(),
    cfg: SolverConfig = SolverConfig(),
    parallel: bool = True,
) -> DmsldaResult:
    """Run the distributed estimator with ``master`` as machine 1 and one link per other machine.

    ``grid`` is one configuration for every round or a sequence of
    ``rounds + 1`` configurations. Returns the round with the smallest
    validation loss (earliest on ties) along with the full history.
    """
    if rounds < 0:
        raise ValueError("rounds must be nonnegative")
    if not isinstance(grid, GridConfig) and len(grid) != rounds + 1:
        raise ValueError(f"need {rounds + 1} grid configurations, got {len(grid)}")
    M = len(links) + 1
    if M == 1:
        logger.warning("no worker machines: penalties fall back to the smallest grid value")

    a = master.pooled_cov
    lip = lipschitz_upper_bound(a)
    history: list[RoundRecord] = []

    with Session(links, parallel=parallel) as session:

        def select(t, c):
            g = _grid_for(grid, t)
            lams = lambda_grid(c, g.size, g.ratio)
            reports = _solve_candidates(a, c, lams, cfg, lip)
            cands = [r.solution for r in reports]
            if M == 1:
                i = _pick(reports, None)
                history.append(RoundRecord(t, cands[i], lams[i], 0.0))
                return cands[i], None
            anchor = cands[0] if len(cands) == 1 else None
            losses, grad = session.score(t, cands, anchor)
            i = _pick(reports, losses[:-1])
            history.append(RoundRecord(t, cands[i], lams[i], float(losses[i])))
            return cands[i], grad

        w, worker_grad = select(0, master.mean_diffs)
        for t in range(1, rounds + 1):
            if M > 1 and worker_grad is None:
                _, worker_grad = session.score(t, [], w)
            g_bar = local_gradient(master, w)
            if M > 1:
                g_bar = (g_bar + worker_grad) / M
            c = shifted_problem(master, w, g_bar, 0.0).linear
            w, worker_grad = select(t, c)

    best = int(np.argmin([h.validation_loss for h in history]))
    return DmsldaResult(chosen=history[best].w, history=history, ledger=session.ledger)


def gather_projected_stats(
    master: ClassSummaries,
    links: Sequence[Link],
    w: np.ndarray,
    round: int = 0,
    ledger: CommLedger | None = None,
) -> ReducedLdaModel:
    """Reduced-space LDA from every machine's projected statistics.

    Projected covariances are averaged with equal machine weights and
    projected centroids pooled by count, matching
    ``fit_reduced_lda(w, average_summaries(...))``.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.shape != master.mean_diffs.shape:
        raise ShapeMismatch(f"W has shape {w.shape}, expected {master.mean_diffs.shape}")
    if not np.any(w):
        raise ZeroProjection("cannot classify with an all-zero projection")
    if not links:
        return fit_reduced_lda(w, master)
    means = [master.class_means @ w]
    covs = [w.T @ master.pooled_cov @ w]
    counts = [master.class_counts]
    with Session(links, ledger) as session:
        for rep in session.exchange(wire.ProjectedStatsRequest(round, w), wire.ProjectedStatsReply):
            means.append(rep.proj_means)
            covs.append(rep.proj_cov)
            counts.append(rep.class_counts)
    counts = np.asarray(counts)
    total = counts.sum(axis=0)
    pooled_means = np.sum([m * c[:, None] for m, c in zip(means, counts)], axis=0) / total[:, None]
    return model_from_projected(w, pooled_means, np.mean(covs, axis=0), total)


def in_memory_links(summaries: Sequence[ClassSummaries]) -> list:
    """One in-process link per summary, named ``machine-2``, ``machine-3``, ..."""
    return [
        in_memory_transport(Worker(s, name=f"machine-{m}"))
        for m, s in enumerate(summaries, start=2)
    ]
