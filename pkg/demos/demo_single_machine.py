"""
Sparse discriminant directions on one machine
=============================================

A three-class Gaussian problem in 400 dimensions where only six
coordinates carry signal. We fit the penalized discriminant matrix along a
penalty path and watch sparsity and accuracy trade off.
"""

import warnings

import numpy as np

from dmslda.classifier import fit_reduced_lda, predict_batch
from dmslda.core import NotConvergedWarning
from dmslda.csl import lambda_grid
from dmslda.experiments import generate_shards, l22_error, misclassification_rate, multiclass_setting, population_summaries
from dmslda.oracle import oracle_discriminant
from dmslda.solver import solve_path
from dmslda.summaries import compute_class_summaries

###############################################################################
# One machine with 70 samples per class, so ``n = 210 < d = 400``.

setting = multiclass_setting(sigma_param=0.5, M=1)
(shard,), test = generate_shards(setting, seed=0)
summ = compute_class_summaries(shard)
print("pooled covariance rank:", np.linalg.matrix_rank(summ.pooled_cov), "of", setting.d)

###############################################################################
# The population answer is available in simulation, which lets us measure
# estimation error directly.

pop = population_summaries(setting)
w_star = oracle_discriminant(pop.pooled_cov, pop.mean_diffs)
# the AR(1) precision matrix is tridiagonal, so W* is exactly sparse up to roundoff
print("rows of W* above 1e-10:", np.flatnonzero(np.any(np.abs(w_star) > 1e-10, axis=1)))

###############################################################################
# Walk the path from the largest useful penalty downward. Small penalties
# on a singular covariance make the problem unbounded, and the solver says
# so by reporting ``converged=False``.

lams = lambda_grid(summ.mean_diffs, 10, 0.7)
with warnings.catch_warnings():
    warnings.simplefilter("ignore", NotConvergedWarning)
    path = solve_path(summ.pooled_cov, summ.mean_diffs, lams)
for lam, rep in zip(lams, path):
    w = rep.solution
    if not rep.converged:
        print(f"lambda={lam:.3f}  did not converge")
        continue
    mcr = (
        misclassification_rate(predict_batch(fit_reduced_lda(w, summ), test.features), test.labels)
        if np.any(w) else float("nan")
    )
    print(f"lambda={lam:.3f}  nonzeros={np.count_nonzero(w):3d}  l22={l22_error(w, w_star):.3f}  mcr={mcr:.3f}")
