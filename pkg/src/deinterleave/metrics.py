"""Deinterleaving accuracy and the majority-user baseline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from deinterleave.interleaver import TurnScheduler


def accuracy(truth, pred) -> float:
    """Fraction of slots whose user was recovered."""
    truth = np.asarray(truth).reshape(-1)
    pred = np.asarray(pred).reshape(-1)
    if truth.shape != pred.shape:
        raise ValueError(f"length mismatch: {truth.size} vs {pred.size}")
    if truth.size == 0:
        raise ValueError("accuracy of an empty sequence is undefined")
    return float(np.mean(truth == pred))


@dataclass(frozen=True)
class ConstantPredictor:
    user: int
    expected_accuracy: float

    def __call__(self, obs) -> np.ndarray:
        return np.full(len(obs), self.user, dtype=np.int64)


def baseline_majority(sched: TurnScheduler) -> ConstantPredictor:
    """Always name the user with the largest long-run share of the queue."""
    share = sched.values if sched.mode == "shares" else sched.initial
    user = int(np.argmax(share))
    return ConstantPredictor(user, float(share[user]))
