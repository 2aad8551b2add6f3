"""
One user as a hidden semi-Markov model
======================================

A user sits on a page for a few requests, then jumps to another page.
"""
import numpy as np

from deinterleave import UserModel, make_rng, simulate_user

# three pages; page 2 is sticky, pages 0 and 1 alternate
P = np.array([[0.0, 0.8, 0.2],
              [0.7, 0.0, 0.3],
              [0.1, 0.1, 0.8]])
# how many requests a visit lasts (1..4), per page
pw = np.array([[0.5, 0.5, 0.0, 0.0],
               [0.0, 0.0, 0.5, 0.5],
               [0.25, 0.25, 0.25, 0.25]])
# what each page asks the resolver for (here: 3 request names)
O = np.array([[0.9, 0.1, 0.0],
              [0.0, 0.9, 0.1],
              [0.1, 0.0, 0.9]])
user = UserModel(P, pw, O)

requests, pages, durations = simulate_user(user, 20, make_rng(0))
print("request ", requests)
print("page    ", pages)
print("left    ", durations)

# the page only changes once the remaining count has reached 1
changes = np.flatnonzero(np.diff(pages)) + 1
print("page changes after d=1:", bool(np.all(durations[changes - 1] == 1)))

# long run: visits to page 1 last 3.5 requests on average
requests, pages, durations = simulate_user(user, 50_000, make_rng(1))
starts = np.r_[0, np.flatnonzero(durations[:-1] == 1) + 1]  # a visit begins after d=1
print("mean visit length on page 1:", durations[starts][pages[starts] == 1].mean())
