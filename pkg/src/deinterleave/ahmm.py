"""Exact inference on the augmented (product) HMM of the interleaving process.

The hidden state is ``H = (L_0, ..., L_{m-1}, U)`` where ``L_k = (page, d)`` is
user ``k``'s lumped state right before its next emission and ``U`` is the user
filling the current slot. ``H`` emits ``O_U[page_U, .]``. Going from slot
``t-1`` to ``t`` the user who emitted at ``t-1`` (``u'``) takes its HsMM step
while every other user is stalled, and the next slot goes to ``u`` with
probability ``A[u', u]``::

    P(H | H') = A[u', u] * K_{u'}(l'_{u'} -> l_{u'}) * prod_{k != u'} [l_k == l'_k]

    K_u((w', d') -> (w, d)) = [w == w'][d == d' - 1]    if d' > 1
                            = P_u[w', w] * pw[w, d]       if d' == 1

This is exactly the law of :func:`deinterleave.interleaver.interleave`.

Canonical state order: ``index = lin(L) * m + u`` with
``lin(L) = sum_k l_k * (n q)^(m-1-k)`` and ``l = page * q + (d - 1)``, i.e. a
C-order flattening of an array of shape ``(nq,) * m + (m,)``. Viterbi ties
(scores equal up to ``TIE_RTOL``) are resolved toward the lower canonical index.

Transitions are never materialised for large models: both recursions apply the
factored kernel one user axis at a time, costing ``O(S * n q)`` per step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from deinterleave.core import UserModel
from deinterleave.interleaver import TurnScheduler

DEFAULT_STATE_LIMIT = 100_000
DENSE_LIMIT = 4096
# scores this close to the maximum count as ties (sums of the same terms in
# different orders differ by a few ulps)
TIE_RTOL = 1e-12


class StateSpaceTooLarge(ValueError):
    pass


class ImpossibleSequenceError(ValueError):
    """Every hidden path assigns the observations probability zero."""


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(x, dtype=float))


def _lse(x: np.ndarray, axis: int) -> np.ndarray:
    mx = np.max(x, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(mx), mx, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(x - shift), axis=axis, keepdims=True)) + shift
    return np.squeeze(out, axis=axis)


def _near_max(x: np.ndarray, best: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return x >= best - TIE_RTOL * np.maximum(1.0, np.abs(best))


def _first_near_max(x: np.ndarray, axis: int) -> np.ndarray:
    best = np.max(x, axis=axis, keepdims=True)
    return np.argmax(_near_max(x, best), axis=axis)


def state_count(m: int, n: int, q: int) -> int:
    return m * (n * q) ** m


@dataclass(frozen=True, eq=False)
class AugmentedHMM:
    m: int
    n: int
    q: int
    log_init: np.ndarray  # (S,)
    log_kernels: np.ndarray  # (m, nq, nq), lumped-state step of each user
    log_turn: np.ndarray  # (m, m)
    log_emission: np.ndarray  # (S, n)

    @property
    def n_states(self) -> int:
        return state_count(self.m, self.n, self.q)

    @property
    def grid(self) -> tuple[int, ...]:
        return (self.n * self.q,) * self.m + (self.m,)

    def index(self, pages, durations, user: int) -> int:
        """Canonical index of ``((pages[k], durations[k]) for k, user)``."""
        nq = self.n * self.q
        lin = 0
        for w, d in zip(pages, durations):
            lin = lin * nq + int(w) * self.q + int(d) - 1
        return lin * self.m + int(user)

    def decode(self, idx):
        """Split canonical indices into ``(pages, durations, users)``.

        ``pages`` and ``durations`` have a trailing axis of length ``m``.
        """
        idx = np.asarray(idx, dtype=np.int64)
        users = idx % self.m
        coords = np.stack(np.unravel_index(idx // self.m, self.grid[:-1]), axis=-1)
        return coords // self.q, coords % self.q + 1, users

    def transition_row(self, i: int) -> np.ndarray:
        """Log transition probabilities out of state ``i`` (computed on demand)."""
        pages, durs, src = self.decode(i)
        lumped = [int(w) * self.q + int(d) - 1 for w, d in zip(pages, durs)]
        row = np.full(self.grid, -np.inf)
        for l_new in range(self.n * self.q):
            dest = list(lumped)
            dest[src] = l_new
            row[tuple(dest)] = self.log_kernels[src, lumped[src], l_new] + self.log_turn[src]
        return row.reshape(-1)

    def transition_matrix(self) -> np.ndarray:
        if self.n_states > DENSE_LIMIT:
            raise StateSpaceTooLarge(
                f"{self.n_states} states is too many for a dense transition table"
            )
        return np.stack([self.transition_row(i) for i in range(self.n_states)])


def lumped_log_kernel(model: UserModel) -> np.ndarray:
    n, q = model.n, model.q
    K = np.zeros((n * q, n * q))
    for w in range(n):
        for d in range(2, q + 1):
            K[w * q + d - 1, w * q + d - 2] = 1.0
        K[w * q, :] = (model.transition[w][:, None] * model.duration_dist).reshape(-1)
    return _log(K)


def build_ahmm(
    models: list[UserModel], sched: TurnScheduler, limit: int = DEFAULT_STATE_LIMIT
) -> AugmentedHMM:
    m = len(models)
    if m == 0 or sched.m != m:
        raise ValueError(f"{m} models but scheduler is for {sched.m} users")
    n, q = models[0].n, models[0].q
    if any(mod.n != n or mod.q != q for mod in models):
        raise ValueError("all user models must share (n, q)")
    S = state_count(m, n, q)
    if S > limit:
        raise StateSpaceTooLarge(f"augmented state space has {S} states (limit {limit})")
    nq = n * q
    grid = (nq,) * m + (m,)

    kernels = np.stack([lumped_log_kernel(mod) for mod in models])
    log_turn = _log(sched.transition_matrix())

    # each user starts on a uniform page with a duration from that page's pw
    init = np.zeros(grid)
    for k, mod in enumerate(models):
        l0 = (np.full((n, 1), 1.0 / n) * mod.duration_dist).reshape(-1)
        shape = [1] * (m + 1)
        shape[k] = nq
        init = init + _log(l0).reshape(shape)
    init = init + _log(sched.initial).reshape((1,) * m + (m,))

    emis = np.empty(grid + (n,))
    for u, mod in enumerate(models):
        per_lumped = np.repeat(_log(mod.output), q, axis=0)  # (nq, n)
        shape = [1] * m + [n]
        shape[u] = nq
        emis[..., u, :] = np.broadcast_to(per_lumped.reshape(shape), grid[:-1] + (n,))

    return AugmentedHMM(
        m, n, q,
        log_init=init.reshape(-1),
        log_kernels=kernels,
        log_turn=log_turn,
        log_emission=emis.reshape(S, n),
    )


def _check_obs(hmm: AugmentedHMM, obs) -> np.ndarray:
    obs = np.asarray(obs, dtype=np.int64).reshape(-1)
    if obs.size == 0:
        raise ValueError("observation sequence is empty")
    if obs.min() < 0 or obs.max() >= hmm.n:
        raise ValueError(f"observations must lie in [0, {hmm.n})")
    return obs


def _advance(hmm: AugmentedHMM, delta: np.ndarray, reduce: str):
    """Apply each source user's step to ``delta`` (shape ``grid``).

    Returns per-source values of shape ``grid[:-1] + (m,)`` and, for ``max``,
    the canonical index of the best predecessor for each entry.
    """
    m, nq = hmm.m, hmm.n * hmm.q
    lin = np.arange(nq**m).reshape(hmm.grid[:-1])
    vals, preds = [], []
    for src in range(m):
        D = np.moveaxis(delta[..., src], src, -1)
        X = D[..., :, None] + hmm.log_kernels[src]
        if reduce == "max":
            arg = _first_near_max(X, axis=-2)
            best = np.take_along_axis(X, arg[..., None, :], axis=-2)[..., 0, :]
            arg = np.moveaxis(arg, -1, src)
            coord = np.arange(nq).reshape([nq if k == src else 1 for k in range(m)])
            preds.append((lin + (arg - coord) * nq ** (m - 1 - src)) * m + src)
        else:
            best = _lse(X, axis=-2)
        vals.append(np.moveaxis(best, -1, src))
    return np.stack(vals, axis=-1), (np.stack(preds, axis=-1) if preds else None)


def viterbi(hmm: AugmentedHMM, obs):
    """Most probable augmented path.

    Returns ``(states, users, log_prob)`` where ``states`` are canonical
    indices and ``users`` the active-user component of each.
    """
    obs = _check_obs(hmm, obs)
    T, S, grid = len(obs), hmm.n_states, hmm.grid
    backptr = np.empty((T, S), dtype=np.int64 if S > 2**31 - 1 else np.int32)
    delta = (hmm.log_init + hmm.log_emission[:, obs[0]]).reshape(grid)
    for t in range(1, T):
        vals, preds = _advance(hmm, delta, "max")
        cand = vals[..., :, None] + hmm.log_turn  # (..., src, dst)
        best = np.max(cand, axis=-2)
        tied = _near_max(cand, best[..., None, :])
        backptr[t] = np.min(np.where(tied, preds[..., :, None], S), axis=-2).reshape(-1)
        delta = best + hmm.log_emission[:, obs[t]].reshape(grid)
    flat = delta.reshape(-1)
    last = int(_first_near_max(flat, axis=0))
    log_prob = float(flat.max())
    if log_prob == -np.inf:
        raise ImpossibleSequenceError("observation sequence has zero probability")
    path = np.empty(T, dtype=np.int64)
    path[-1] = last
    for t in range(T - 1, 0, -1):
        path[t - 1] = backptr[t, path[t]]
    return path, path % hmm.m, log_prob


def forward_loglik(hmm: AugmentedHMM, obs) -> float:
    """``log P(obs)`` summed over all augmented paths; ``-inf`` if impossible."""
    obs = _check_obs(hmm, obs)
    grid = hmm.grid
    alpha = (hmm.log_init + hmm.log_emission[:, obs[0]]).reshape(grid)
    for t in range(1, len(obs)):
        vals, _ = _advance(hmm, alpha, "sum")
        alpha = _lse(vals[..., :, None] + hmm.log_turn, axis=-2)
        alpha = alpha + hmm.log_emission[:, obs[t]].reshape(grid)
    return float(_lse(alpha.reshape(-1), axis=0))


def viterbi_dense(log_init, log_trans, log_emission, obs):
    """Textbook log-space Viterbi on explicit tables, lowest-index tie rule.

    Returns ``(states, log_prob)``.
    """
    obs = np.asarray(obs, dtype=np.int64)
    T, S = len(obs), len(log_init)
    backptr = np.zeros((T, S), dtype=np.int64)
    delta = log_init + log_emission[:, obs[0]]
    for t in range(1, T):
        scores = delta[:, None] + log_trans
        backptr[t] = _first_near_max(scores, axis=0)
        delta = scores.max(axis=0) + log_emission[:, obs[t]]
    path = np.empty(T, dtype=np.int64)
    path[-1] = int(_first_near_max(delta, axis=0))
    log_prob = float(delta.max())
    if log_prob == -np.inf:
        raise ImpossibleSequenceError("observation sequence has zero probability")
    for t in range(T - 1, 0, -1):
        path[t - 1] = backptr[t, path[t]]
    return path, log_prob


def forward_dense(log_init, log_trans, log_emission, obs) -> float:
    obs = np.asarray(obs, dtype=np.int64)
    alpha = log_init + log_emission[:, obs[0]]
    for t in range(1, len(obs)):
        alpha = _lse(alpha[:, None] + log_trans, axis=0) + log_emission[:, obs[t]]
    return float(_lse(alpha, axis=0))
