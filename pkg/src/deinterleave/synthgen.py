"""Random scenario factories: the toy problem and the seven sparsity cases.

Cases (two users, ``n`` pages, block size ``a``):

====  ===========================================  ===========================
case  page-transition supports                     output supports
====  ===========================================  ===========================
1     disjoint: user 0 on ``[0, a)``, user 1 rest  same blocks as the pages
2     disjoint blocks as in case 1                 random disjoint column pools
3     disjoint blocks as in case 1                 shared ``O_0 = O_1``
4     random ``a``-subset per user (may overlap)   independent per user
5     random ``a``-subset per user                 shared
6     main block of size ``s ~ U{1..a}`` plus      independent per user
      ``a - s`` auxiliary pages
7     as case 6                                    shared
====  ===========================================  ===========================

Transition rows are discretised Beta densities over their support; every
output row is uniform over ``a`` randomly chosen columns of its pool.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from deinterleave.core import UserModel
from deinterleave.interleaver import TurnScheduler

SHARES = (0.4, 0.6)
MAIN_MASS = 0.8  # share of a row's mass on the main block in cases 6 and 7


@dataclass(frozen=True)
class CaseSpec:
    case_id: int
    n: int = 20
    a: int = 10
    q: int = 5
    mode: str = "shares"

    def __post_init__(self):
        if self.case_id not in range(1, 8):
            raise ValueError(f"case_id must be in 1..7, got {self.case_id}")
        if not 1 <= self.a <= self.n:
            raise ValueError(f"need 1 <= a <= n, got a={self.a}, n={self.n}")
        if self.q < 1:
            raise ValueError("q must be positive")
        if self.mode not in ("shares", "matrix"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.case_id <= 3 and 2 * self.a > self.n:
            raise ValueError("disjoint cases need a <= n / 2")


@dataclass(eq=False)
class ScenarioParams:
    models: list[UserModel]
    sched: TurnScheduler
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.models)

    @property
    def n(self) -> int:
        return self.models[0].n

    @property
    def q(self) -> int:
        return self.models[0].q

    def __eq__(self, other):
        if not isinstance(other, ScenarioParams):
            return NotImplemented
        return (
            len(self.models) == len(other.models)
            and all(a == b for a, b in zip(self.models, other.models))
            and self.sched == other.sched
        )

    __hash__ = None


def discretized_beta_row(support, shape_a: float, shape_b: float, n: int) -> np.ndarray:
    """Beta(shape_a, shape_b) density at the midpoints ``(i - 0.5) / k`` of a
    ``k``-cell grid, spread over ``support`` in ascending column order."""
    support = np.sort(np.asarray(support, dtype=np.int64))
    k = support.size
    if k == 0:
        raise ValueError("support is empty")
    if shape_a <= 0 or shape_b <= 0:
        raise ValueError("Beta shape parameters must be positive")
    x = (np.arange(1, k + 1) - 0.5) / k
    dens = np.exp((shape_a - 1) * np.log(x) + (shape_b - 1) * np.log1p(-x))
    row = np.zeros(n)
    row[support] = dens / dens.sum()
    return row


def uniform_row(support, n: int) -> np.ndarray:
    row = np.zeros(n)
    row[np.asarray(support, dtype=np.int64)] = 1.0 / len(support)
    return row


def gen_output_row(n: int, a: int, rng: np.random.Generator, pool=None) -> np.ndarray:
    """Uniform weight ``1/a`` on ``a`` distinct columns drawn from ``pool``
    (all ``n`` columns by default)."""
    pool = np.arange(n) if pool is None else np.asarray(pool, dtype=np.int64)
    if a > pool.size:
        raise ValueError(f"cannot pick {a} columns from a pool of {pool.size}")
    if a < 1:
        raise ValueError("a must be positive")
    return uniform_row(rng.choice(pool, size=a, replace=False), n)


def gen_turn_matrix(m: int, rng: np.random.Generator) -> TurnScheduler:
    """Diagonally dominant turn matrix: ``A_ii = 0.5 + U/2``, the remainder
    split among the other users proportionally to independent uniforms."""
    A = np.zeros((m, m))
    for i in range(m):
        if m == 1:
            A[i, i] = 1.0
            continue
        A[i, i] = 0.5 + 0.5 * rng.random()
        x = rng.random(m - 1)
        others = [j for j in range(m) if j != i]
        A[i, others] = (1.0 - A[i, i]) * x / x.sum()
    return TurnScheduler.matrix(A)


def _beta_row(support, rng, base_a, base_b, n):
    eps, delta = rng.uniform(-1.0, 1.0, size=2)
    return discretized_beta_row(support, base_a + eps, base_b + delta, n)


def _transition(main, aux, n, rng) -> np.ndarray:
    P = np.empty((n, n))
    for w in range(n):
        row = _beta_row(main, rng, 3.0, 1.0, n)
        if aux is not None and len(aux):
            row = MAIN_MASS * row + (1 - MAIN_MASS) * _beta_row(aux, rng, 2.0, 2.0, n)
        P[w] = row
    return P


def _outputs(n, a, rng, pool=None) -> np.ndarray:
    return np.stack([gen_output_row(n, a, rng, pool) for _ in range(n)])


def gen_case(spec: CaseSpec, rng: np.random.Generator) -> ScenarioParams:
    """Two-user scenario for one of the seven sparsity cases."""
    n, a, q, c = spec.n, spec.a, spec.q, spec.case_id
    meta = {"case_id": c, "n": n, "a": a, "q": q, "mode": spec.mode}

    mains, auxes = [], [None, None]
    if c <= 3:
        mains = [np.arange(a), np.arange(a, n)]
    elif c <= 5:
        mains = [np.sort(rng.choice(n, size=a, replace=False)) for _ in range(2)]
    else:
        auxes = []
        for _ in range(2):
            s = int(rng.integers(1, a + 1))
            picked = rng.choice(n, size=a, replace=False)
            mains.append(np.sort(picked[:s]))
            auxes.append(np.sort(picked[s:]))
        meta["main_sizes"] = [len(x) for x in mains]
    meta["page_supports"] = [x.tolist() for x in mains]
    if auxes[0] is not None:
        meta["aux_supports"] = [x.tolist() for x in auxes]
    Ps = [_transition(mains[u], auxes[u], n, rng) for u in range(2)]

    if c == 1:
        Os = [np.tile(uniform_row(mains[u], n), (n, 1)) for u in range(2)]
    elif c == 2:
        perm = rng.permutation(n)
        pools = [np.sort(perm[:a]), np.sort(perm[a:])]
        Os = [_outputs(n, a, rng, pools[u]) for u in range(2)]
    elif c in (3, 5, 7):
        shared = _outputs(n, a, rng)
        Os = [shared, shared.copy()]
    else:
        Os = [_outputs(n, a, rng) for _ in range(2)]

    pw = np.full((n, q), 1.0 / q)
    models = [UserModel(Ps[u], pw, Os[u]) for u in range(2)]
    sched = TurnScheduler.shares(SHARES) if spec.mode == "shares" else gen_turn_matrix(2, rng)
    return ScenarioParams(models, sched, meta)


def gen_toy(rng: np.random.Generator) -> ScenarioParams:
    """Two users, two pages, two requests, ``q = 2``.

    User ``i`` only ever moves to page ``i``. Each page's output row is a
    discretised Beta(3 + eps, 1 + delta) with ``eps, delta ~ U[0, 1]``; the rows
    belong to the pages and are therefore shared by both users.
    """
    n = q = 2
    O = np.empty((n, n))
    for w in range(n):
        eps, delta = rng.uniform(0.0, 1.0, size=2)
        O[w] = discretized_beta_row(np.arange(n), 3.0 + eps, 1.0 + delta, n)
    pw = np.full((n, q), 1.0 / q)
    models = [UserModel(np.tile(np.eye(n)[i], (n, 1)), pw, O) for i in range(2)]
    return ScenarioParams(models, TurnScheduler.shares(SHARES), {"toy": True})
