"""Communication-efficient distributed estimation over a master and workers."""

from .protocol import (
    CommLedger,
    DmsldaResult,
    GridConfig,
    RoundRecord,
    Session,
    gather_projected_stats,
    in_memory_links,
    lambda_grid,
    local_init,
    run_dmslda,
    shifted_problem,
    validation_loss,
)
from .transport import in_memory_transport, tcp_transport
from .worker import Worker

__all__ = [
    "CommLedger",
    "DmsldaResult",
    "GridConfig",
    "RoundRecord",
    "Session",
    "Worker",
    "gather_projected_stats",
    "in_memory_links",
    "in_memory_transport",
    "lambda_grid",
    "local_init",
    "run_dmslda",
    "shifted_problem",
    "tcp_transport",
    "validation_loss",
]
