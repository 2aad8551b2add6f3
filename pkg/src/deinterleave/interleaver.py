"""Merge several users' request streams into one resolver queue."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from deinterleave.core import (
    MalformedModelError,
    UserModel,
    _cdf_rows,
    check_stochastic,
    init_state,
    sample_index,
    user_step,
)


def stationary_distribution(A, tol: float = 1e-12, max_iter: int = 1_000_000) -> np.ndarray:
    """Stationary law of a row-stochastic matrix by power iteration.

    Iterates the lazy chain ``(A + I) / 2`` from the uniform vector, which has
    the same fixed points as ``A`` but cannot oscillate on periodic chains.
    """
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    lazy = 0.5 * (A + np.eye(m))
    pi = np.full(m, 1.0 / m)
    for _ in range(max_iter):
        nxt = pi @ lazy
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt
        pi = nxt
    raise RuntimeError("power iteration did not converge")


@dataclass(frozen=True, eq=False)
class TurnScheduler:
    """Decides which user fills the next queue slot.

    ``mode == "shares"``: ``values`` is a probability vector, drawn i.i.d.
    ``mode == "matrix"``: ``values`` is a row-stochastic turn matrix ``A`` and
    the next user is drawn from row ``prev``; the very first slot is drawn
    from the stationary distribution of ``A``.
    """

    mode: str
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if self.mode == "shares":
            check_stochastic(vals.reshape(1, -1), "shares")
            vals = vals.reshape(-1)
            cdf = _cdf_rows(vals.reshape(1, -1))
            init = vals.copy()
        elif self.mode == "matrix":
            check_stochastic(vals, "turn_matrix")
            if vals.shape[0] != vals.shape[1]:
                raise MalformedModelError("turn matrix must be square")
            cdf = _cdf_rows(vals)
            init = stationary_distribution(vals)
        else:
            raise ValueError(f"unknown scheduler mode {self.mode!r}")
        vals.setflags(write=False)
        init.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_cdf", cdf)
        object.__setattr__(self, "_init", init)
        object.__setattr__(self, "_init_cdf", np.cumsum(init))

    @classmethod
    def shares(cls, alpha) -> "TurnScheduler":
        return cls("shares", alpha)

    @classmethod
    def matrix(cls, A) -> "TurnScheduler":
        return cls("matrix", A)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def initial(self) -> np.ndarray:
        """Law of the first slot's user."""
        return self._init

    def transition_matrix(self) -> np.ndarray:
        """``A`` itself, or the rank-one matrix with every row equal to the shares."""
        if self.mode == "matrix":
            return self.values
        return np.tile(self.values, (self.m, 1))

    def __eq__(self, other):
        if not isinstance(other, TurnScheduler):
            return NotImplemented
        return self.mode == other.mode and np.array_equal(self.values, other.values)

    __hash__ = None


def next_user(sched: TurnScheduler, prev, rng: np.random.Generator) -> int:
    # a single user never consumes a draw, so m == 1 replays a lone HsMM run
    if sched.m == 1:
        return 0
    if sched.mode == "shares":
        return sample_index(None, rng, cdf=sched._cdf[0])
    if prev is None:
        return sample_index(None, rng, cdf=sched._init_cdf)
    return sample_index(None, rng, cdf=sched._cdf[prev])


@dataclass(eq=False)
class LabeledSequence:
    """A resolver queue with its ground truth.

    ``pages`` and ``durations`` hold each active user's state at the moment it
    emitted; they are ``None`` when the hidden labels were withheld.
    """

    requests: np.ndarray
    users: np.ndarray
    m: int
    n: int
    q: int
    pages: np.ndarray | None = None
    durations: np.ndarray | None = None

    def __post_init__(self):
        self.requests = np.asarray(self.requests, dtype=np.int64).reshape(-1)
        self.users = np.asarray(self.users, dtype=np.int64).reshape(-1)
        T = self.requests.shape[0]
        if self.users.shape[0] != T:
            raise ValueError("requests and users differ in length")
        if (self.pages is None) != (self.durations is None):
            raise ValueError("pages and durations must be given together")
        if self.pages is not None:
            self.pages = np.asarray(self.pages, dtype=np.int64).reshape(-1)
            self.durations = np.asarray(self.durations, dtype=np.int64).reshape(-1)
            if self.pages.shape[0] != T or self.durations.shape[0] != T:
                raise ValueError("hidden label columns differ in length")
        if T:
            if self.users.min() < 0 or self.users.max() >= self.m:
                raise ValueError("user label out of range")
            if self.requests.min() < 0 or self.requests.max() >= self.n:
                raise ValueError("request id out of range")

    def __len__(self) -> int:
        return self.requests.shape[0]

    @property
    def has_hidden(self) -> bool:
        return self.pages is not None

    def __eq__(self, other):
        if not isinstance(other, LabeledSequence):
            return NotImplemented
        same = (self.m, self.n, self.q) == (other.m, other.n, other.q)
        same = same and np.array_equal(self.requests, other.requests)
        same = same and np.array_equal(self.users, other.users)
        if self.has_hidden != other.has_hidden:
            return False
        if self.has_hidden:
            same = same and np.array_equal(self.pages, other.pages)
            same = same and np.array_equal(self.durations, other.durations)
        return bool(same)

    __hash__ = None


def interleave(
    models: list[UserModel], sched: TurnScheduler, T: int, rng: np.random.Generator
) -> LabeledSequence:
    """Generate ``T`` queue slots.

    All users are initialised first (in user order). Then, per slot, the turn is
    drawn and only the chosen user steps; everyone else is stalled.
    """
    m = len(models)
    if m != sched.m:
        raise ValueError(f"{m} models but scheduler is for {sched.m} users")
    if T < 0:
        raise ValueError("T must be non-negative")
    n, q = models[0].n, models[0].q
    if any(mod.n != n or mod.q != q for mod in models):
        raise ValueError("all user models must share (n, q)")
    states = [init_state(mod, rng) for mod in models]
    requests = np.empty(T, dtype=np.int64)
    users = np.empty(T, dtype=np.int64)
    pages = np.empty(T, dtype=np.int64)
    durations = np.empty(T, dtype=np.int64)
    u = None
    for t in range(T):
        u = next_user(sched, u, rng)
        pages[t], durations[t] = states[u]
        states[u], requests[t] = user_step(models[u], states[u], rng)
        users[t] = u
    return LabeledSequence(requests, users, m, n, q, pages, durations)


def split_by_user(seq: LabeledSequence) -> list[np.ndarray]:
    """Per-user request subsequences, in queue order."""
    return [seq.requests[seq.users == k] for k in range(seq.m)]
