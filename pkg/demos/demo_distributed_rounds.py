"""
Closing the gap to the pooled fit in a few rounds
=================================================

Twenty machines each hold 210 samples. The master refines its own fit by
borrowing the average gradient of all machines, one round at a time, and
never sees another machine's covariance.
"""

from dmslda.csl import in_memory_links, run_dmslda
from dmslda.experiments import centralized_fit, generate_shards, l22_error, multiclass_setting, population_summaries
from dmslda.oracle import oracle_discriminant
from dmslda.summaries import compute_class_summaries

setting = multiclass_setting(sigma_param=0.5, M=20)
shards, _ = generate_shards(setting, seed=1)
parts = [compute_class_summaries(s) for s in shards]
pop = population_summaries(setting)
w_star = oracle_discriminant(pop.pooled_cov, pop.mean_diffs)

###############################################################################
# Run three rounds. Each round record holds the selected penalty and the
# summed loss of the other machines, which decides the returned round.

res = run_dmslda(parts[0], in_memory_links(parts[1:]), rounds=3)
for h in res.history:
    print(f"round {h.round}: lambda={h.lam:.3f}  validation={h.validation_loss:9.3f}  l22={l22_error(h.w, w_star):.3f}")
print("returned round:", res.chosen_round)

###############################################################################
# Compare with pooling everything on one machine.

w_cen, lam_cen = centralized_fit(parts)
print(f"centralized: lambda={lam_cen:.3f}  l22={l22_error(w_cen, w_star):.3f}")

###############################################################################
# Communication: every byte crossing the master's links, against shipping
# each worker's covariance once.

d = setting.d
print(f"session payload: {res.ledger.payload_bytes:,} bytes in {res.ledger.messages_sent} messages")
print(f"covariances alone: {(setting.M - 1) * 8 * d * d:,} bytes")
for rnd, nbytes in res.ledger.per_round:
    print(f"  round {rnd}: {nbytes:,} bytes")
