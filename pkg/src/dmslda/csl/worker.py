"""Worker side of the protocol: answers requests from its own shard statistics."""

from __future__ import annotations

import numpy as np

from ..core import ClassSummaries, ShapeMismatch, TransportFailure
from ..summaries import local_gradient, local_loss
from . import wire


class Worker:
    """Holds one machine's summaries and answers encoded requests.

    Only projected or aggregated quantities leave the worker: gradients,
    scalar losses, and ``(K - 1)``-dimensional projected statistics.
    """

    def __init__(self, summaries: ClassSummaries, name: str = "worker"):
        self.summaries = summaries
        self.name = name

    def _check(self, w: np.ndarray) -> None:
        if w.shape != self.summaries.mean_diffs.shape:
            raise ShapeMismatch(
                f"{self.name}: got a {w.shape} model, expected {self.summaries.mean_diffs.shape}"
            )

    def respond(self, msg: wire.Message) -> wire.Message:
        s = self.summaries
        if isinstance(msg, wire.BroadcastCandidates):
            losses = []
            for c in msg.candidates:
                self._check(c)
                losses.append(local_loss(s, c))
            if msg.anchor.size:
                self._check(msg.anchor)
                grad = local_gradient(s, msg.anchor)
                losses.append(local_loss(s, msg.anchor))
            else:
                grad = wire.empty_matrix()
                losses.append(0.0)
            return wire.GradientAndLossReply(msg.round, grad, np.array(losses))
        if isinstance(msg, wire.ProjectedStatsRequest):
            self._check(msg.w)
            w = msg.w
            return wire.ProjectedStatsReply(
                msg.round, s.class_means @ w, w.T @ s.pooled_cov @ w, s.class_counts
            )
        raise TransportFailure(
            f"workers do not handle {type(msg).__name__}", peer=self.name, kind=msg.kind.name
        )

    def handle(self, body: bytes) -> bytes:
        return wire.encode(self.respond(wire.decode(body)))
