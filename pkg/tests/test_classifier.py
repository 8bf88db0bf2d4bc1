import numpy as np
import pytest

from dmslda.classifier import fit_reduced_lda, predict, predict_batch
from dmslda.core import LabeledDataset, ShapeMismatch, ZeroProjection
from dmslda.summaries import compute_class_summaries

from conftest import random_dataset


@pytest.fixture
def hand_summaries():
    data = LabeledDataset(np.array([[0.0], [2.0], [1.0], [3.0]]), np.array([1, 1, 2, 2]), 2)
    return compute_class_summaries(data)


def test_hand_model(hand_summaries):
    m = fit_reduced_lda(np.array([[1.0]]), hand_summaries)
    np.testing.assert_array_equal(m.proj_means, [[1.0], [2.0]])
    assert m.proj_cov[0, 0] == pytest.approx(2.0 + 2e-8, abs=1e-15)
    np.testing.assert_allclose(m.log_priors, np.log([0.5, 0.5]))


def test_zero_projection(hand_summaries):
    with pytest.raises(ZeroProjection):
        fit_reduced_lda(np.zeros((1, 1)), hand_summaries)


def test_bilinear_scaling(rng):
    s = compute_class_summaries(random_dataset(rng, 20, 5, 3))
    w = rng.standard_normal((5, 2))
    m1, m2 = fit_reduced_lda(w, s), fit_reduced_lda(2 * w, s)
    np.testing.assert_allclose(m2.proj_means, 2 * m1.proj_means, rtol=1e-14)
    np.testing.assert_allclose(m2.proj_cov, 4 * m1.proj_cov, rtol=1e-12)


def test_centroid_maps_to_its_class(rng):
    s = compute_class_summaries(random_dataset(rng, 30, 6, 4, shift=4.0))
    w = rng.standard_normal((6, 3))
    m = fit_reduced_lda(w, s)
    assert list(predict_batch(m, s.class_means)) == [1, 2, 3, 4]
    assert predict(m, s.class_means[2]) == 3
    with pytest.raises(ShapeMismatch):
        predict(m, np.zeros(5))


def test_binary_rule_matches_sign_test(rng):
    data = random_dataset(rng, 25, 4, 2)
    s = compute_class_summaries(data)
    w = rng.standard_normal((4, 1))
    m = fit_reduced_lda(w, s)
    xs = rng.standard_normal((100, 4)) * 2
    z = xs @ w[:, 0]
    m1, m2 = m.proj_means[:, 0]
    var = m.proj_cov[0, 0]
    # class 1 iff (z - (m1 + m2)/2)(m1 - m2)/var + log(pi1/pi2) >= 0
    stat = (z - 0.5 * (m1 + m2)) * (m1 - m2) / var + (m.log_priors[0] - m.log_priors[1])
    expect = np.where(stat >= 0, 1, 2)
    np.testing.assert_array_equal(predict_batch(m, xs), expect)


def test_scores_match_linear_solve(rng):
    s = compute_class_summaries(random_dataset(rng, 20, 6, 3))
    w = rng.standard_normal((6, 2))
    m = fit_reduced_lda(w, s)
    xs = rng.standard_normal((10, 6))
    expect = np.empty((10, 3))
    for k in range(3):
        u = np.linalg.solve(m.proj_cov, m.proj_means[k])
        expect[:, k] = (xs @ w) @ u - 0.5 * m.proj_means[k] @ u + m.log_priors[k]
    np.testing.assert_allclose(m.scores(xs), expect, rtol=1e-10, atol=1e-10)


def test_basis_invariance(rng):
    s = compute_class_summaries(random_dataset(rng, 40, 6, 3))
    w = rng.standard_normal((6, 2))
    r = np.array([[2.0, 1.0], [0.5, 1.5]])
    xs = rng.standard_normal((200, 6))
    np.testing.assert_array_equal(
        predict_batch(fit_reduced_lda(w, s), xs), predict_batch(fit_reduced_lda(w @ r, s), xs)
    )
