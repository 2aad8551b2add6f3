import numpy as np
import pytest

from deinterleave.core import UserModel
from deinterleave.interleaver import TurnScheduler

ACCEPTANCE_LINES: list[str] = []


def random_rows(rng, rows, cols, sparsity=0.0):
    mat = rng.random((rows, cols))
    mat[rng.random((rows, cols)) < sparsity] = 0.0
    for r in mat:
        if r.sum() == 0:
            r[rng.integers(cols)] = 1.0
    return mat / mat.sum(axis=1, keepdims=True)


def random_scenario(rng, m, n, q, sparsity=0.0, mode=None):
    models = [
        UserModel(
            random_rows(rng, n, n, sparsity),
            random_rows(rng, n, q, sparsity),
            random_rows(rng, n, n, sparsity),
        )
        for _ in range(m)
    ]
    mode = mode or ("shares" if rng.random() < 0.5 else "matrix")
    if mode == "shares":
        sched = TurnScheduler.shares(random_rows(rng, 1, m)[0])
    else:
        sched = TurnScheduler.matrix(random_rows(rng, m, m, sparsity))
    return models, sched


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
