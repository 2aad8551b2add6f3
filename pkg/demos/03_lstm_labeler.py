"""
Learning the labels with an LSTM
================================

No model parameters are given to the network: it reads one-hot requests and
is trained on labeled traffic with truncated BPTT and Adam.
"""
import logging

from deinterleave import CaseSpec, gen_case, interleave, make_rng
from deinterleave.metrics import accuracy
from deinterleave.rnn import LabeledDataset, RnnConfig, predict_users, train

logging.basicConfig(level=logging.DEBUG, format="%(message)s")

rng = make_rng(3)
scen = gen_case(CaseSpec(6, mode="matrix"), rng)  # bursty turns, overlapping sites
tr, va, te = (interleave(scen.models, scen.sched, T, rng) for T in (6000, 2000, 2000))

cfg = RnnConfig(input_size=scen.n, output_size=scen.m, hidden_size=32, max_epochs=4)
result = train(LabeledDataset(tr, va, te), cfg, rng)
print("epochs run:", len(result.log), "best:", result.best_epoch)

pred = predict_users(result.params, cfg, te.requests)
print("test accuracy: %.3f" % accuracy(te.users, pred))
print("validation curve:", [round(e["val_accuracy"], 3) for e in result.log])

