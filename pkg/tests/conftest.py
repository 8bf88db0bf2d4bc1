import numpy as np
import pytest

from dmslda.core import LabeledDataset
from dmslda.summaries import compute_class_summaries


def random_dataset(rng, n_per_class, d, K, shift=1.0):
    labels = np.repeat(np.arange(1, K + 1), n_per_class)
    means = shift * rng.standard_normal((K, d))
    x = means[labels - 1] + rng.standard_normal((labels.size, d))
    return LabeledDataset(x, labels, K)


def random_spd(rng, d, cond=10.0):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    eig = np.geomspace(1.0, cond, d)
    a = (q * eig) @ q.T
    return 0.5 * (a + a.T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def shard_summaries(rng):
    """Summaries of four shards drawn from one three-class model."""
    return [compute_class_summaries(random_dataset(rng, 15, 8, 3)) for _ in range(4)]


_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
        _CRITERIA.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1].rstrip(":").split(".")[0])):
            terminalreporter.write_line(line)
