"""Single-user browsing model: a hidden semi-Markov chain over pages.

A user sits on a page ``w`` with ``d`` requests still to issue. Each step emits
one request from ``O[w]``; if that was the page's last request (``d == 1``) the
user jumps to ``w' ~ P[w]`` and draws a fresh count ``d' ~ pw[w']``, otherwise
``d`` is decremented. Durations therefore always live in ``[1, q]``.

Randomness comes from ``numpy.random.Generator`` backed by PCG64. Every discrete
draw consumes exactly one ``rng.random()`` double and inverts the row's CDF
(cumulative sum taken left to right), so a seed fully determines a trajectory.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

ROW_TOL = 1e-12


class MalformedModelError(ValueError):
    """Raised when model parameters are not valid probability tables."""


def make_rng(seed) -> np.random.Generator:
    """PCG64-backed generator. ``seed`` may be an int or a ``SeedSequence``."""
    return np.random.Generator(np.random.PCG64(seed))


def _cdf(row: np.ndarray) -> np.ndarray:
    return np.cumsum(row)


def sample_index(row, rng: np.random.Generator, cdf=None) -> int:
    """Inverse-CDF draw from a probability row using one uniform double."""
    if cdf is None:
        cdf = _cdf(np.asarray(row, dtype=float))
    if cdf[-1] <= 0.0:
        raise MalformedModelError("cannot sample from an all-zero row")
    u = rng.random()
    i = int(np.searchsorted(cdf, u, side="right"))
    if i >= len(cdf):
        # u landed above a total that rounded below 1: take the last live entry
        i = int(np.flatnonzero(np.diff(cdf, prepend=0.0) > 0)[-1])
    return i


def check_stochastic(mat, name: str, ncols: int | None = None) -> np.ndarray:
    mat = np.array(mat, dtype=float)
    if mat.ndim != 2:
        raise MalformedModelError(f"{name} must be 2-D, got shape {mat.shape}")
    if ncols is not None and mat.shape[1] != ncols:
        raise MalformedModelError(f"{name} must have {ncols} columns, got {mat.shape[1]}")
    if not np.all(np.isfinite(mat)) or np.any(mat < 0):
        raise MalformedModelError(f"{name} has negative or non-finite entries")
    sums = mat.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_TOL)
    if bad.size:
        raise MalformedModelError(
            f"{name} row {bad[0]} sums to {sums[bad[0]]!r}, expected 1"
        )
    return mat


@dataclass(frozen=True, eq=False)
class UserModel:
    """HsMM parameters of one user.

    transition : (n, n) page transition matrix ``P``
    duration_dist : (n, q) row ``w`` is ``pw(d)`` for ``d = 1..q``
    output : (n, n) request emission matrix ``O``
    """

    transition: np.ndarray
    duration_dist: np.ndarray
    output: np.ndarray

    def __post_init__(self):
        P = check_stochastic(self.transition, "transition")
        n = P.shape[0]
        if P.shape != (n, n):
            raise MalformedModelError(f"transition must be square, got {P.shape}")
        pw = check_stochastic(self.duration_dist, "duration_dist")
        if pw.shape[0] != n:
            raise MalformedModelError("duration_dist needs one row per page")
        O = check_stochastic(self.output, "output", ncols=n)
        if O.shape[0] != n:
            raise MalformedModelError("output needs one row per page")
        for name, arr in (("transition", P), ("duration_dist", pw), ("output", O)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_cdfs", (_cdf_rows(P), _cdf_rows(pw), _cdf_rows(O)))

    @property
    def n(self) -> int:
        return self.transition.shape[0]

    @property
    def q(self) -> int:
        return self.duration_dist.shape[1]

    def __eq__(self, other):
        if not isinstance(other, UserModel):
            return NotImplemented
        return (
            np.array_equal(self.transition, other.transition)
            and np.array_equal(self.duration_dist, other.duration_dist)
            and np.array_equal(self.output, other.output)
        )

    __hash__ = None


def _cdf_rows(mat: np.ndarray) -> np.ndarray:
    out = np.cumsum(mat, axis=1)
    out.setflags(write=False)
    return out


class UserState(NamedTuple):
    page: int
    duration: int


def init_state(model: UserModel, rng: np.random.Generator) -> UserState:
    """Uniform starting page, duration drawn from that page's ``pw``."""
    n = model.n
    page = sample_index(np.full(n, 1.0 / n), rng)
    duration = 1 + sample_index(None, rng, cdf=model._cdfs[1][page])
    return UserState(page, duration)


def user_step(
    model: UserModel, state: UserState, rng: np.random.Generator
) -> tuple[UserState, int]:
    """Emit one request from the current page, then advance the user.

    Returns ``(next_state, request)``. Draw order: request, then (only when the
    page is exhausted) next page and its duration.
    """
    page, d = state
    if d < 1 or d > model.q:
        raise ValueError(f"duration {d} outside [1, {model.q}]")
    cdf_P, cdf_pw, cdf_O = model._cdfs
    request = sample_index(None, rng, cdf=cdf_O[page])
    if d > 1:
        return UserState(page, d - 1), request
    nxt = sample_index(None, rng, cdf=cdf_P[page])
    return UserState(nxt, 1 + sample_index(None, rng, cdf=cdf_pw[nxt])), request


def simulate_user(model: UserModel, T: int, rng: np.random.Generator):
    """Run one user alone for ``T`` steps.

    Returns arrays ``(requests, pages, durations)`` where pages and durations
    are the pre-emission states.
    """
    requests = np.empty(T, dtype=np.int64)
    pages = np.empty(T, dtype=np.int64)
    durations = np.empty(T, dtype=np.int64)
    state = init_state(model, rng)
    for t in range(T):
        pages[t], durations[t] = state
        state, requests[t] = user_step(model, state, rng)
    return requests, pages, durations
