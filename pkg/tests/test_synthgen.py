import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deinterleave.ahmm import build_ahmm
from deinterleave.core import make_rng
from deinterleave.synthgen import (
    CaseSpec,
    discretized_beta_row,
    gen_case,
    gen_output_row,
    gen_toy,
    gen_turn_matrix,
)


def test_beta_one_one_is_uniform():
    row = discretized_beta_row([2, 5, 7, 9], 1.0, 1.0, 10)
    np.testing.assert_allclose(row[[2, 5, 7, 9]], 0.25, rtol=1e-15)
    assert row.sum() == pytest.approx(1.0, abs=1e-15)


def test_beta_three_one_on_two_cells():
    # density 3x^2 at 0.25 and 0.75: 0.1875 and 1.6875, normalised
    row = discretized_beta_row([0, 1], 3.0, 1.0, 2)
    np.testing.assert_allclose(row, [0.1, 0.9], rtol=1e-12)


def test_beta_support_order_is_ascending():
    row = discretized_beta_row([4, 1], 3.0, 1.0, 5)
    assert row[4] > row[1] > 0 and row[[0, 2, 3]].sum() == 0


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(0, 29), min_size=1, max_size=30, unique=True),
    st.floats(0.05, 6.0),
    st.floats(0.05, 6.0),
)
def test_beta_rows_are_distributions(support, a, b):
    row = discretized_beta_row(support, a, b, 30)
    assert abs(row.sum() - 1.0) <= 1e-12
    assert np.all(row[support] > 0)


def test_beta_errors():
    with pytest.raises(ValueError):
        discretized_beta_row([], 1.0, 1.0, 4)
    with pytest.raises(ValueError):
        discretized_beta_row([0], 0.0, 1.0, 4)


def test_output_rows():
    rng = make_rng(0)
    np.testing.assert_allclose(gen_output_row(6, 6, rng), np.full(6, 1 / 6))
    row = gen_output_row(20, 10, rng)
    assert np.count_nonzero(row) == 10 and np.all(row[row > 0] == 0.1)
    with pytest.raises(ValueError):
        gen_output_row(5, 6, rng)


def test_output_columns_are_uniformly_chosen():
    rng = make_rng(1)
    hits = sum((gen_output_row(20, 10, rng) > 0).astype(int) for _ in range(10_000))
    np.testing.assert_allclose(hits / 10_000, 0.5, atol=0.02)


def test_turn_matrix():
    rng = make_rng(2)
    assert gen_turn_matrix(1, rng).values.tolist() == [[1.0]]
    for m in (2, 3, 5):
        A = gen_turn_matrix(m, rng).values
        assert np.all(np.diag(A) >= 0.5) and np.all(np.diag(A) < 1.0)
        np.testing.assert_allclose(A.sum(axis=1), 1.0, atol=1e-12)


def _support(mat):
    return set(np.flatnonzero(mat.sum(axis=0)))


def test_case1_blocks():
    scen = gen_case(CaseSpec(1), make_rng(3))
    (m0, m1) = scen.models
    assert _support(m0.transition) == set(range(10)) == _support(m0.output)
    assert _support(m1.transition) == set(range(10, 20)) == _support(m1.output)


@pytest.mark.parametrize("seed", range(5))
def test_disjoint_supports(seed):
    for case in (1, 2, 3):
        m0, m1 = gen_case(CaseSpec(case), make_rng(seed)).models
        assert not _support(m0.transition) & _support(m1.transition)
        if case < 3:
            assert not _support(m0.output) & _support(m1.output)
        else:
            np.testing.assert_array_equal(m0.output, m1.output)


def test_shared_and_personalized_outputs():
    for case in (5, 7):
        m0, m1 = gen_case(CaseSpec(case), make_rng(case)).models
        np.testing.assert_array_equal(m0.output, m1.output)
    for case in (4, 6):
        m0, m1 = gen_case(CaseSpec(case), make_rng(case)).models
        assert not np.array_equal(m0.output, m1.output)


def test_case6_main_block_size_uniform():
    rng = make_rng(4)
    sizes = [gen_case(CaseSpec(6, n=12, a=10, q=2), rng).meta["main_sizes"][0] for _ in range(1000)]
    freq = np.bincount(sizes, minlength=11)[1:] / 1000
    np.testing.assert_allclose(freq, 0.1, atol=0.03)


def test_case6_rows_cover_main_and_auxiliary():
    scen = gen_case(CaseSpec(6), make_rng(5))
    for u, mod in enumerate(scen.models):
        pages = set(scen.meta["page_supports"][u]) | set(scen.meta["aux_supports"][u])
        assert len(pages) == 10 and _support(mod.transition) == pages


@pytest.mark.parametrize("case", range(1, 8))
@pytest.mark.parametrize("mode", ["shares", "matrix"])
def test_cases_are_valid_and_reproducible(case, mode):
    a = gen_case(CaseSpec(case, mode=mode), make_rng(6))
    b = gen_case(CaseSpec(case, mode=mode), make_rng(6))
    assert a == b and a.m == 2 and a.n == 20 and a.q == 5
    for mod in a.models:
        np.testing.assert_allclose(mod.duration_dist, 0.2)
        for tab in (mod.transition, mod.output, mod.duration_dist):
            assert np.all(np.abs(tab.sum(axis=1) - 1) <= 1e-12)
    if mode == "shares":
        assert a.sched.values.tolist() == [0.4, 0.6]
    else:
        assert np.all(np.diag(a.sched.values) >= 0.5)


def test_invalid_case_specs():
    with pytest.raises(ValueError):
        CaseSpec(8)
    with pytest.raises(ValueError):
        CaseSpec(2, n=20, a=11)
    with pytest.raises(ValueError):
        CaseSpec(4, n=5, a=6)


def test_toy():
    scen = gen_toy(make_rng(7))
    assert build_ahmm(scen.models, scen.sched).n_states == 32
    for i, mod in enumerate(scen.models):
        np.testing.assert_array_equal(mod.transition, np.tile(np.eye(2)[i], (2, 1)))
        assert np.all(mod.output > 0)
        np.testing.assert_allclose(mod.output.sum(axis=1), 1.0, atol=1e-12)
    assert scen.sched.values.tolist() == [0.4, 0.6]
