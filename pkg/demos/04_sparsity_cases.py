"""
How overlap between users hurts
===============================

The seven cases move from disjoint sites with disjoint requests (case 1) to
overlapping sites that share requests (case 7). A small run of the case table.
"""
import logging

from deinterleave.experiments import REFERENCE_CASES, run_cases

logging.basicConfig(level=logging.INFO, format="%(message)s")

# one realization per case, capped epochs: well under a minute on one core
report = run_cases("shares", seed=0, realizations=1, n_test=20, lstm_overrides={"max_epochs": 3})
print(report.render())
print("reference means:", REFERENCE_CASES["shares"])

# for the full table with five realizations:
#   deinterleave reproduce-cases --mode shares --out results/shares
