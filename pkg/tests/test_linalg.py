import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from auvtrack.errors import NotSymmetric, RankDeficient
from auvtrack.linalg import pseudoinverse, solve_least_squares, sym_eigen


def test_pseudoinverse_identity():
    np.testing.assert_array_equal(pseudoinverse(np.eye(3)), np.eye(3))


def test_pseudoinverse_diagonal():
    np.testing.assert_allclose(pseudoinverse(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]), atol=1e-15)


def test_pseudoinverse_matches_normal_equations(rng):
    a = rng.normal(size=(4, 3))
    direct = np.linalg.inv(a.T @ a) @ a.T
    np.testing.assert_allclose(pseudoinverse(a), direct, atol=1e-10)
    assert np.max(np.abs(pseudoinverse(a) @ a - np.eye(3))) < 1e-9


def test_pseudoinverse_rank_deficient_coplanar():
    # Buoy offsets all in the z = 0 plane.
    a = np.array([[1.0, 0, 0], [0, 1.0, 0], [1.0, 1.0, 0], [2.0, -1.0, 0]])
    with pytest.raises(RankDeficient):
        pseudoinverse(a)


def test_pseudoinverse_wide_matrix_rejected():
    with pytest.raises(RankDeficient):
        pseudoinverse(np.ones((2, 3)))


def test_least_squares_exact_square(rng):
    a = rng.normal(size=(3, 3)) + 3 * np.eye(3)
    x0 = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(solve_least_squares(a, a @ x0), x0, atol=1e-12)


def test_least_squares_mean_of_two_points():
    np.testing.assert_allclose(solve_least_squares([[1.0], [1.0]], [0.0, 2.0]), [1.0])


def test_least_squares_planted_overdetermined(rng):
    a = rng.normal(size=(5, 3))
    x0 = rng.normal(size=3)
    assert np.max(np.abs(solve_least_squares(a, a @ x0) - x0)) < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 12))
def test_least_squares_residual_orthogonal(seed, rows):
    r = np.random.default_rng(seed)
    a = r.normal(size=(rows, 3)) + np.vstack([np.eye(3), np.zeros((rows - 3, 3))])
    if np.linalg.cond(a) > 1e6:
        return
    b = r.normal(size=rows)
    x = solve_least_squares(a, b)
    assert np.max(np.abs(a.T @ (a @ x - b))) < 1e-8


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 8))
def test_pseudoinverse_left_inverse(seed, rows):
    a = np.random.default_rng(seed).normal(size=(rows, 3))
    if np.linalg.cond(a) > 1e6:
        return
    assert np.max(np.abs(pseudoinverse(a) @ a - np.eye(3))) < 1e-9


def test_sym_eigen_identity():
    w, v = sym_eigen(np.eye(3))
    np.testing.assert_allclose(w, [1, 1, 1])
    np.testing.assert_allclose(v.T @ v, np.eye(3), atol=1e-15)


def test_sym_eigen_diagonal_sorted_descending():
    w, v = sym_eigen(np.diag([4.0, 9.0, 1.0]))
    np.testing.assert_allclose(w, [9, 4, 1])
    np.testing.assert_allclose(np.abs(v), np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]]), atol=1e-15)


def test_sym_eigen_reconstruction(rng):
    b = rng.normal(size=(6, 6))
    m = b + b.T
    w, v = sym_eigen(m)
    assert np.all(np.diff(w) <= 0)
    np.testing.assert_allclose(v @ np.diag(w) @ v.T, m, atol=1e-9)
    np.testing.assert_allclose(v.T @ v, np.eye(6), atol=1e-12)
    for i in range(6):
        np.testing.assert_allclose(m @ v[:, i], w[i] * v[:, i], atol=1e-9)


def test_sym_eigen_rejects_asymmetric():
    with pytest.raises(NotSymmetric):
        sym_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))
