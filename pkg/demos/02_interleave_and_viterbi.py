"""
Interleaving two users and decoding with Viterbi
================================================

The resolver sees one merged stream. With the true parameters, the augmented
HMM (all users' pages and durations plus the active user) is exact, and
Viterbi recovers the most probable labeling.
"""
import numpy as np

from deinterleave import (
    CaseSpec, build_ahmm, forward_loglik, gen_case, interleave, make_rng, split_by_user, viterbi,
)
from deinterleave.metrics import accuracy, baseline_majority

# case 1: the users browse disjoint halves of the site, so the stream is separable
rng = make_rng(7)
scen = gen_case(CaseSpec(1, n=8, a=4, q=3), rng)
seq = interleave(scen.models, scen.sched, 300, rng)
print("first requests:", seq.requests[:15])
print("who sent them: ", seq.users[:15])

parts = split_by_user(seq)
print("per-user lengths:", [len(p) for p in parts])

hmm = build_ahmm(scen.models, scen.sched)
print("augmented states:", hmm.n_states)  # (n*q)^m * m = 24^2 * 2

states, users, logp = viterbi(hmm, seq.requests)
print("viterbi accuracy:", accuracy(seq.users, users))
print("path log-prob %.1f <= sequence log-lik %.1f" % (logp, forward_loglik(hmm, seq.requests)))

# the decoded state also names each user's page and remaining duration
pages, durs, active = hmm.decode(states[:5])
print("decoded pages of the first 5 slots:\n", pages)

# case 3: same page split, but both users now share one output table.
# requests no longer identify the user
scen = gen_case(CaseSpec(3, n=8, a=4, q=3), rng)
seq = interleave(scen.models, scen.sched, 300, rng)
_, users, _ = viterbi(build_ahmm(scen.models, scen.sched), seq.requests)
base = baseline_majority(scen.sched)
print("case 3 viterbi %.3f, constant predictor %.3f"
      % (accuracy(seq.users, users), accuracy(seq.users, base(seq.requests))))
