"""Command line entry point: ``dmslda {fit,predict,experiment,serve-worker}``."""

from __future__ import annotations

import argparse
import contextlib
import logging
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .classifier import predict_batch
from .csl import GridConfig, gather_projected_stats, in_memory_links, run_dmslda, tcp_transport
from .csl.transport import listen, serve
from .csl.worker import Worker
from .io import load_model, read_dataset, read_matrix, save_model, shard_paths
from .solver import SolverConfig
from .summaries import compute_class_summaries

logger = logging.getLogger("dmslda")


def spawn_worker(shard: Path, num_classes: int, host: str = "127.0.0.1"):
    """Start ``serve-worker`` in a child process on a free port.

    Returns the process and its ``host:port`` address.
    """
    proc = subprocess.Popen(
        [
            sys.executable, "-m", "dmslda", "serve-worker",
            "--listen", f"{host}:0", "--shard", str(shard), "--num-classes", str(num_classes),
        ],
        stdout=subprocess.PIPE,
        text=True,
    )
    line = proc.stdout.readline().strip()
    if not line.startswith("listening on "):
        proc.kill()
        raise RuntimeError(f"worker for {shard} failed to start: {line!r}")
    return proc, line.removeprefix("listening on ")


@contextlib.contextmanager
def local_worker_processes(shards, num_classes: int):
    """Context manager yielding addresses of one worker process per shard file."""
    procs, addrs = [], []
    try:
        for shard in shards:
            proc, addr = spawn_worker(Path(shard), num_classes)
            procs.append(proc)
            addrs.append(addr)
        yield addrs
    finally:
        for proc in procs:
            with contextlib.suppress(subprocess.TimeoutExpired):
                proc.wait(timeout=10)
            if proc.poll() is None:
                proc.kill()
            proc.stdout.close()


def cmd_fit(args) -> int:
    paths = shard_paths(args.input)
    if args.machines is not None:
        if args.machines > len(paths):
            raise SystemExit(f"--machines {args.machines} but only {len(paths)} shards in {args.input}")
        paths = paths[: args.machines]
    master_data = read_dataset(paths[0], args.num_classes)
    K = master_data.num_classes
    master = compute_class_summaries(master_data)
    grid = GridConfig(args.grid_size, args.grid_ratio)
    cfg = SolverConfig(max_iterations=args.max_iterations, kkt_tolerance=args.kkt_tolerance)

    with contextlib.ExitStack() as stack:
        if args.transport == "memory":
            others = [compute_class_summaries(read_dataset(p, K)) for p in paths[1:]]
            links = in_memory_links(others)
        else:
            addrs = args.workers.split(",") if args.workers else stack.enter_context(
                local_worker_processes(paths[1:], K)
            )
            if len(addrs) != len(paths) - 1:
                raise SystemExit(f"need {len(paths) - 1} worker addresses, got {len(addrs)}")
            links = [tcp_transport(a) for a in addrs]
            for link in links:
                stack.callback(link.close)
        res = run_dmslda(master, links, rounds=args.rounds, grid=grid, cfg=cfg)
        model = gather_projected_stats(master, links, res.chosen, round=args.rounds, ledger=res.ledger)

    save_model(args.out, model, round=res.chosen_round)
    print(
        f"machines={len(paths)} chosen_round={res.chosen_round} lambda={res.chosen_lambda:.6g} "
        f"nonzeros={int(np.count_nonzero(res.chosen))} payload_bytes={res.ledger.payload_bytes} "
        f"messages={res.ledger.messages_sent}"
    )
    for h in res.history:
        print(f"round={h.round} lambda={h.lam:.6g} validation_loss={h.validation_loss:.10g}")
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    arr = read_matrix(args.input)
    truth = None
    if arr.shape[1] == model.d + 1:
        arr, truth = arr[:, :-1], arr[:, -1].astype(np.int64)
    elif arr.shape[1] != model.d:
        raise SystemExit(f"{args.input} has {arr.shape[1]} columns, model expects {model.d}")
    labels = predict_batch(model, arr)
    with open(args.out, "w") as fh:
        fh.write("label\n")
        fh.writelines(f"{int(v)}\n" for v in labels)
    if truth is not None:
        mcr = experiments.misclassification_rate(labels, truth)
        print(f"n={labels.size} mcr={mcr:.6g}")
    return 0


def cmd_experiment(args) -> int:
    make = experiments.desk_settings if args.scale == "desk" else experiments.full_settings
    settings = make(args.family, seed=args.seed)
    if args.repetitions is not None:
        settings = [experiments.dataclasses.replace(s, repetitions=args.repetitions) for s in settings]
    experiments.run_sweep(settings, out=args.out, timing=args.timing)
    return 0


def cmd_serve_worker(args) -> int:
    data = read_dataset(args.shard, args.num_classes)
    worker = Worker(compute_class_summaries(data), name=Path(args.shard).stem)
    with listen(args.listen) as sock:
        host, port = sock.getsockname()[:2]
        print(f"listening on {host}:{port}", flush=True)
        serve(worker, sock, persistent=args.persistent)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dmslda", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit the distributed estimator on a directory of shard CSVs")
    f.add_argument("--input", required=True, help="directory of shard CSVs; the first by name is the master")
    f.add_argument("--machines", type=int, help="use only the first M shards")
    f.add_argument("--rounds", type=int, default=3)
    f.add_argument("--grid-size", type=int, default=10)
    f.add_argument("--grid-ratio", type=float, default=0.7)
    f.add_argument("--transport", choices=("memory", "tcp"), default="memory")
    f.add_argument("--workers", help="comma-separated host:port list; spawns local workers if omitted")
    f.add_argument("--num-classes", type=int)
    f.add_argument("--max-iterations", type=int, default=5000)
    f.add_argument("--kkt-tolerance", type=float, default=1e-6)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict", help="label a CSV with a fitted model")
    pr.add_argument("--model", required=True)
    pr.add_argument("--input", required=True)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_predict)

    e = sub.add_parser("experiment", help="run a simulation sweep and write CSV results")
    e.add_argument("--family", choices=("multiclass", "binary"), default="multiclass")
    e.add_argument(
        "--scale", choices=("desk", "paper"), default="desk",
        help="desk: 10 repetitions with fewer machines; paper: 40 repetitions over M = 20..60",
    )
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--repetitions", type=int)
    e.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_experiment)

    w = sub.add_parser("serve-worker", help="serve one shard over TCP")
    w.add_argument("--listen", required=True, help="host:port, port 0 picks a free port")
    w.add_argument("--shard", required=True)
    w.add_argument("--num-classes", type=int)
    w.add_argument("--persistent", action="store_true", help="keep serving after the master disconnects")
    w.set_defaults(func=cmd_serve_worker)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
