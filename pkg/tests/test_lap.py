import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bnn_align import lap


def brute_force_max(scores):
    d = scores.shape[0]
    return max(sum(scores[i, p[i]] for i in range(d)) for p in itertools.permutations(range(d)))


perms = st.integers(1, 9).flatmap(lambda d: st.permutations(list(range(d)))).map(np.array)
square = st.integers(1, 6).flatmap(
    lambda d: arrays(np.float64, (d, d), elements=st.floats(-1e3, 1e3, allow_nan=False))
)


def test_identity_matrix_gives_identity():
    assert np.array_equal(lap.solve_lap_max(np.eye(5)), np.arange(5))


def test_anti_diagonal():
    s = np.fliplr(np.eye(4)) * 3.0
    assert np.array_equal(lap.solve_lap_max(s), [3, 2, 1, 0])
    assert lap.objective([3, 2, 1, 0], s) == 12.0


def test_two_by_two_by_hand():
    s = np.array([[1.0, 5.0], [4.0, 1.0]])
    assert np.array_equal(lap.solve_lap_max(s), [1, 0])


@pytest.mark.parametrize("bad", [np.ones((2, 3)), np.ones(3), np.array([[1.0, np.nan], [0.0, 1.0]])])
def test_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        lap.solve_lap_max(bad)


@settings(max_examples=200, deadline=None)
@given(square)
def test_matches_brute_force(s):
    perm = lap.solve_lap_max(s)
    assert sorted(perm) == list(range(s.shape[0]))
    assert lap.objective(perm, s) == pytest.approx(brute_force_max(s), rel=1e-12, abs=1e-9)


@given(perms, st.floats(-100, 100))
def test_objective_invariant_to_constant_shift(p, c):
    # adding c to every entry adds d*c to every assignment, so the argmax is unchanged
    rng = np.random.default_rng(len(p))
    s = rng.standard_normal((p.size, p.size))
    best = lap.objective(lap.solve_lap_max(s), s)
    shifted = s + c
    assert lap.objective(lap.solve_lap_max(shifted), s) == pytest.approx(best, abs=1e-9)


@given(perms)
def test_matrix_conventions(p):
    a = np.arange(p.size * 3, dtype=float).reshape(p.size, 3)
    mat = lap.to_matrix(p)
    assert np.array_equal(lap.permute_rows(p, a), mat @ a)
    assert np.array_equal(lap.permute_cols(p, a.T), a.T @ mat.T)
    s = np.random.default_rng(0).standard_normal((p.size, p.size))
    assert lap.objective(p, s) == pytest.approx(np.sum(mat * s))


@given(perms)
def test_invert(p):
    assert np.array_equal(lap.compose(p, lap.invert(p)), np.arange(p.size))
    assert np.array_equal(lap.compose(lap.invert(p), p), np.arange(p.size))


@given(perms, st.randoms())
def test_compose_is_matrix_product(p1, r):
    p2 = np.array(r.sample(range(p1.size), p1.size))
    assert np.array_equal(lap.to_matrix(lap.compose(p2, p1)), lap.to_matrix(p2) @ lap.to_matrix(p1))


@pytest.mark.parametrize("bad", [[0, 0], [1, 2], [0.0, 1.0]])
def test_rejects_non_bijection(bad):
    with pytest.raises(ValueError):
        lap._check_perm(np.array(bad))
