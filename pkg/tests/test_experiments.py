import dataclasses

import numpy as np
import pytest

from dmslda.core import DimensionTooSmall, LengthMismatch, ShapeMismatch
from dmslda.experiments import (
    CSV_FIELDS,
    ar1_covariance,
    binary_setting,
    generate_shards,
    l11_error,
    l22_error,
    misclassification_rate,
    multiclass_setting,
    family_means,
    run_sweep,
    run_trial,
)


def small(**kw):
    return multiclass_setting(**{"d": 30, "b": 20, "M": 3, "T": 2, "test_per_class": 50, **kw})


def test_ar1_covariance():
    s = ar1_covariance(4, 0.5)
    assert s[0, 3] == 0.125 and s[2, 2] == 1.0
    np.testing.assert_array_equal(ar1_covariance(3, 0.0), np.eye(3))


def test_means_of_both_families():
    m = family_means(multiclass_setting(d=8))
    np.testing.assert_array_equal(m[1], [0, 0, 0, 2, 2, 2, 0, 0])
    np.testing.assert_array_equal(m[2], np.zeros(8))
    b = family_means(binary_setting(d=12))
    np.testing.assert_array_equal(b[1], -b[0])
    assert b[0, 9] == 0.5 and b[0, 10] == 0.0
    with pytest.raises(DimensionTooSmall):
        family_means(multiclass_setting(d=5))
    with pytest.raises(DimensionTooSmall):
        family_means(binary_setting(d=9))


def test_shard_shapes_and_determinism():
    s = small()
    shards, test = generate_shards(s, 3)
    assert len(shards) == 3
    for sh in shards:
        assert sh.features.shape == (60, 30)
        np.testing.assert_array_equal(sh.class_counts(), [20, 20, 20])
    assert test.n == 150
    again, _ = generate_shards(s, 3)
    assert again[1].features.tobytes() == shards[1].features.tobytes()
    other, _ = generate_shards(s, 4)
    assert other[1].features.tobytes() != shards[1].features.tobytes()


def test_shards_do_not_depend_on_machine_count():
    a, _ = generate_shards(small(M=2), 0)
    b, _ = generate_shards(small(M=4), 0)
    assert a[1].features.tobytes() == b[1].features.tobytes()


def test_identity_covariance_in_large_samples():
    s = multiclass_setting(d=6, b=2000, M=1, sigma_param=0.0)
    shards, _ = generate_shards(s, 0)
    x = shards[0].features[shards[0].labels == 3]
    cov = np.cov(x, rowvar=False)
    assert np.abs(cov - np.diag(np.diag(cov))).max() <= 0.1


def test_error_metrics(rng):
    a = rng.standard_normal((5, 2))
    assert l22_error(a, a) == 0.0
    b = a.copy()
    b[2, 1] += 3.0
    assert l22_error(b, a) == pytest.approx(3.0) and l11_error(b, a) == pytest.approx(3.0)
    c = rng.standard_normal((5, 2))
    assert l22_error(a, c) == pytest.approx(np.sqrt(sum((a[i, j] - c[i, j]) ** 2 for i in range(5) for j in range(2))), rel=1e-12)
    assert l11_error(a, c) == pytest.approx(sum(abs(a[i, j] - c[i, j]) for i in range(5) for j in range(2)), rel=1e-12)
    with pytest.raises(ShapeMismatch):
        l22_error(a, c[:, :1])


def test_misclassification_rate():
    assert misclassification_rate([1, 2, 3], [1, 2, 3]) == 0.0
    assert misclassification_rate([2, 3, 1], [1, 2, 3]) == 1.0
    assert misclassification_rate([1, 1, 2, 2], [1, 2, 2, 1]) == 0.5
    with pytest.raises(LengthMismatch):
        misclassification_rate([1], [1, 2])


def test_single_machine_trial_collapses():
    recs = run_trial(small(M=1), 0)
    for name in ("dmslda", "centralized"):
        assert recs[name].w.tobytes() == recs["local"].w.tobytes()
        assert recs[name].mcr == recs["local"].mcr


def test_oracle_reaches_the_bayes_error_without_correlation():
    # nearest-mean Bayes error of this design, estimated with 4e5 Monte Carlo draws
    bayes = 0.0566
    recs = run_trial(small(sigma_param=0.0, d=20, test_per_class=300), 1)
    assert recs["oracle"].l22_error == 0.0
    assert abs(recs["oracle"].mcr - bayes) <= 3 * np.sqrt(bayes * (1 - bayes) / 900)


def test_sweep_csv_is_reproducible(tmp_path):
    settings = [small(repetitions=2)]
    out = tmp_path / "r.csv"
    text = run_sweep(settings, out=out)
    assert out.read_text() == text
    assert run_sweep(settings) == text
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_FIELDS)
    # 2 seeds x 4 methods, then mean and std per method
    assert len(lines) == 1 + 8 + 8
    assert lines[-1].startswith("std,")
    timed = run_sweep([dataclasses.replace(settings[0], repetitions=1)], timing=True)
    assert timed.splitlines()[1].split(",")[-1] != ""
