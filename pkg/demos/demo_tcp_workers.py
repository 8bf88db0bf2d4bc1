"""
Workers as separate processes
=============================

The same session over loopback TCP, one OS process per worker shard. The
wire bodies are identical to the in-memory run, so the result and byte
count match exactly.
"""

import tempfile
from pathlib import Path

from dmslda.cli import local_worker_processes
from dmslda.csl import in_memory_links, run_dmslda, tcp_transport
from dmslda.experiments import generate_shards, multiclass_setting
from dmslda.io import read_dataset, write_dataset
from dmslda.summaries import compute_class_summaries

setting = multiclass_setting(d=100, b=50, M=4)
shards, _ = generate_shards(setting, seed=2)

with tempfile.TemporaryDirectory() as tmp:
    paths = [Path(tmp) / f"machine{m}.csv" for m in range(1, setting.M + 1)]
    for p, sh in zip(paths, shards):
        write_dataset(p, sh)
    # CSV floats are written losslessly, so both runs see the same statistics
    parts = [compute_class_summaries(read_dataset(p, setting.K)) for p in paths]

    mem = run_dmslda(parts[0], in_memory_links(parts[1:]))

    with local_worker_processes(paths[1:], setting.K) as addrs:
        print("workers listening on", ", ".join(addrs))
        links = [tcp_transport(a) for a in addrs]
        tcp = run_dmslda(parts[0], links)
        for link in links:
            link.close()

print("identical chosen W:", tcp.chosen.tobytes() == mem.chosen.tobytes())
print("identical ledgers:", tcp.ledger == mem.ledger, f"({tcp.ledger.payload_bytes:,} bytes)")
