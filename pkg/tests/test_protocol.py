import threading

import numpy as np
import pytest

from dmslda.core import ShapeMismatch, TransportFailure, ZeroLinearTerm
from dmslda.csl import (
    CommLedger,
    GridConfig,
    Worker,
    gather_projected_stats,
    in_memory_links,
    in_memory_transport,
    lambda_grid,
    local_init,
    run_dmslda,
    shifted_problem,
    tcp_transport,
    validation_loss,
)
from dmslda.csl.transport import listen, serve
from dmslda.classifier import fit_reduced_lda
from dmslda.solver import solve_path
from dmslda.summaries import average_summaries, compute_class_summaries, local_gradient, local_loss

from conftest import random_dataset

HEADER = 10
DIMS = 8


def mat(r, c):
    return DIMS + 8 * r * c


def session_bytes(workers, d, q, G, T):
    """Payload bytes of one session, both directions, from the wire layout."""
    cand = mat(d, q)
    if G == 1:
        request = HEADER + 4 + cand + cand
        reply = HEADER + mat(d, q) + 8 * 2
        per_worker = (T + 1) * (request + reply)
    else:
        sel = (HEADER + 4 + G * cand + mat(0, 0)) + (HEADER + mat(0, 0) + 8 * (G + 1))
        grad = (HEADER + 4 + cand) + (HEADER + mat(d, q) + 8)
        per_worker = (T + 1) * sel + T * grad
    return workers * per_worker


def shards(seed, M, d=12, K=3, per_class=12):
    rng = np.random.default_rng(seed)
    return [compute_class_summaries(random_dataset(rng, per_class, d, K)) for _ in range(M)]


def test_lambda_grid():
    c = np.array([[0.5, -2.0]])
    assert lambda_grid(c, 3, 0.5) == [2.0, 1.0, 0.5]
    with pytest.raises(ZeroLinearTerm):
        lambda_grid(np.zeros((2, 1)), 3, 0.5)
    with pytest.raises(ValueError):
        lambda_grid(c, 0, 0.5)
    with pytest.raises(ValueError):
        lambda_grid(c, 3, 1.0)


def test_shift_gradient_identity(rng):
    parts = shards(1, 5)
    w = rng.standard_normal(parts[0].mean_diffs.shape)
    g_bar = np.mean([local_gradient(p, w) for p in parts], axis=0)
    p = shifted_problem(parts[0], w, g_bar, 0.1)
    np.testing.assert_allclose(p.quad @ w - p.linear, g_bar, rtol=0, atol=1e-12)
    with pytest.raises(ShapeMismatch):
        shifted_problem(parts[0], w[:-1], g_bar, 0.1)


def test_single_machine_collapse():
    master = shards(2, 1)[0]
    lams = lambda_grid(master.mean_diffs, 10, 0.7)
    expect = solve_path(master.pooled_cov, master.mean_diffs, lams)[-1].solution
    for T in (0, 1, 3):
        res = run_dmslda(master, [], rounds=T)
        assert res.chosen.tobytes() == expect.tobytes()
        assert res.ledger.payload_bytes == 0
        assert res.chosen_round == 0


def test_local_init_without_validator_takes_smallest_penalty():
    master = shards(3, 1)[0]
    lams = lambda_grid(master.mean_diffs, 5, 0.6)
    w, lam = local_init(master, lams, None)
    assert lam == lams[-1]
    w_tie, lam_tie = local_init(master, lams, lambda cands: np.zeros(len(cands)))
    # equal losses keep the largest penalty, whose fit is zero
    assert lam_tie == lams[0] and not np.any(w_tie)


def test_round_selection_contract():
    parts = shards(4, 4)
    res = run_dmslda(parts[0], in_memory_links(parts[1:]), rounds=3)
    e = [h.validation_loss for h in res.history]
    assert [h.round for h in res.history] == [0, 1, 2, 3]
    assert res.chosen is res.history[res.chosen_round].w
    assert e[res.chosen_round] == min(e)
    for h in res.history:
        assert h.validation_loss == pytest.approx(sum(local_loss(p, h.w) for p in parts[1:]), abs=1e-12)


def test_deterministic():
    parts = shards(5, 3)
    a = run_dmslda(parts[0], in_memory_links(parts[1:]), rounds=2)
    b = run_dmslda(parts[0], in_memory_links(parts[1:]), rounds=2)
    assert a.chosen.tobytes() == b.chosen.tobytes()
    assert a.ledger == b.ledger


def test_parallel_and_serial_agree():
    parts = shards(6, 4)
    a = run_dmslda(parts[0], in_memory_links(parts[1:]), rounds=2, parallel=True)
    b = run_dmslda(parts[0], in_memory_links(parts[1:]), rounds=2, parallel=False)
    assert a.chosen.tobytes() == b.chosen.tobytes() and a.ledger == b.ledger


@pytest.mark.parametrize("G,T,M", [(1, 2, 3), (10, 2, 3), (4, 0, 2), (3, 3, 5)])
def test_ledger_matches_closed_form(G, T, M):
    d, K = 20, 3
    parts = shards(7, M, d=d, K=K)
    res = run_dmslda(parts[0], in_memory_links(parts[1:]), rounds=T, grid=GridConfig(G, 0.7))
    assert res.ledger.payload_bytes == session_bytes(M - 1, d, K - 1, G, T)
    per_round = 2 * (M - 1) if G == 1 else 2 * (M - 1) * 2
    assert res.ledger.messages_sent == (T + 1) * per_round - (0 if G == 1 else 2 * (M - 1))


def test_ledger_per_round_sums_to_total():
    parts = shards(8, 3)
    res = run_dmslda(parts[0], in_memory_links(parts[1:]), rounds=2)
    assert sum(b for _, b in res.ledger.per_round) == res.ledger.payload_bytes
    assert [r for r, _ in res.ledger.per_round] == [0, 1, 2]


def test_validation_loss(rng):
    parts = shards(9, 4)
    links = in_memory_links(parts[1:])
    assert validation_loss(np.zeros(parts[0].mean_diffs.shape), links) == 0.0
    w = rng.standard_normal(parts[0].mean_diffs.shape)
    assert validation_loss(w, links[:1]) == local_loss(parts[1], w)
    assert validation_loss(w, links) == pytest.approx(
        sum(local_loss(p, w) for p in parts[1:]), abs=1e-12
    )
    with pytest.raises(ValueError):
        validation_loss(w, [])


def test_projected_stats_match_pooled_fit(rng):
    parts = shards(10, 4)
    w = rng.standard_normal(parts[0].mean_diffs.shape)
    ledger = CommLedger()
    model = gather_projected_stats(parts[0], in_memory_links(parts[1:]), w, ledger=ledger)
    ref = fit_reduced_lda(w, average_summaries(parts))
    np.testing.assert_allclose(model.proj_means, ref.proj_means, rtol=1e-12)
    np.testing.assert_allclose(model.proj_cov, ref.proj_cov, rtol=1e-12)
    np.testing.assert_allclose(model.log_priors, ref.log_priors, rtol=1e-12)
    assert ledger.messages_sent == 6


class ExplodingWorker(Worker):
    def respond(self, msg):
        raise RuntimeError("disk on fire")


def test_worker_failure_aborts_session():
    parts = shards(11, 3)
    links = in_memory_links(parts[1:2]) + [in_memory_transport(ExplodingWorker(parts[2], "bad"))]
    with pytest.raises(TransportFailure) as info:
        run_dmslda(parts[0], links, rounds=1)
    assert "bad" in info.value.peer


def start_tcp_worker(summ, name):
    sock = listen("127.0.0.1:0")
    host, port = sock.getsockname()[:2]
    thread = threading.Thread(target=serve, args=(Worker(summ, name), sock), daemon=True)
    thread.start()
    return f"{host}:{port}", sock, thread


def test_tcp_matches_in_memory():
    parts = shards(12, 3)
    mem = run_dmslda(parts[0], in_memory_links(parts[1:]), rounds=2)
    started = [start_tcp_worker(p, f"w{i}") for i, p in enumerate(parts[1:])]
    links = [tcp_transport(addr, timeout=10) for addr, _, _ in started]
    try:
        tcp = run_dmslda(parts[0], links, rounds=2)
    finally:
        for link in links:
            link.close()
        for _, sock, thread in started:
            thread.join(timeout=10)
            sock.close()
    assert tcp.chosen.tobytes() == mem.chosen.tobytes()
    assert tcp.ledger == mem.ledger


def test_tcp_worker_error_surfaces_as_transport_failure():
    parts = shards(13, 2)
    sock = listen("127.0.0.1:0")
    addr = "%s:%d" % sock.getsockname()[:2]
    thread = threading.Thread(
        target=serve, args=(ExplodingWorker(parts[1], "bad"), sock), daemon=True
    )
    thread.start()
    link = tcp_transport(addr, timeout=10)
    try:
        with pytest.raises(TransportFailure):
            run_dmslda(parts[0], [link], rounds=1)
    finally:
        link.close()
        thread.join(timeout=10)
        sock.close()


def test_tcp_connect_refused():
    sock = listen("127.0.0.1:0")
    addr = "%s:%d" % sock.getsockname()[:2]
    sock.close()
    with pytest.raises(TransportFailure):
        tcp_transport(addr, timeout=2)
