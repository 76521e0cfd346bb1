"""Tests for block composition and sparse solves."""

import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp

from hallmhd.errors import NoConvergence, ShapeMismatch, SingularMatrix
from hallmhd.linalg import (
    Factorization,
    compose,
    export_matrix,
    relative_residual,
    solve,
)


def test_compose_identity_blocks():
    # identity diagonals with empty off-diagonal blocks gives the identity
    blocks = [
        [sp.identity(3), None],
        [None, sp.identity(2)],
    ]
    rhs = [np.array([1.0, 2.0, 3.0]), np.array([4.0, 5.0])]
    A, b = compose(blocks, rhs)
    assert A.shape == (5, 5)
    x, res = solve(A, b)
    assert np.allclose(x, b, atol=1e-14)
    assert res < 1e-14


def test_compose_blockwise_matvec():
    # monolithic product must reproduce the blockwise one
    rng = np.random.default_rng(7)
    B00 = sp.random(4, 4, density=0.6, random_state=1)
    B01 = sp.random(4, 3, density=0.6, random_state=2)
    B10 = sp.random(2, 4, density=0.6, random_state=3)
    blocks = [[B00, B01], [B10, None]]
    rhs = [np.zeros(4), np.zeros(2)]
    A, _ = compose(blocks, rhs)
    x = rng.standard_normal(7)
    y_block = np.concatenate(
        [B00 @ x[:4] + B01 @ x[4:], B10 @ x[:4]]
    )
    assert np.max(np.abs(A @ x - y_block)) < 1e-13


def test_compose_rejects_inconsistent_shapes():
    blocks = [
        [sp.identity(3), sp.random(2, 2, density=1.0)],
        [None, sp.identity(2)],
    ]
    rhs = [np.zeros(3), np.zeros(2)]
    with pytest.raises(ShapeMismatch):
        compose(blocks, rhs)


def test_compose_rejects_bad_rhs():
    blocks = [[sp.identity(3)]]
    with pytest.raises(ShapeMismatch):
        compose(blocks, [np.zeros(2)])
    with pytest.raises(ShapeMismatch):
        compose(blocks, [np.zeros(3), np.zeros(1)])


def test_compose_rejects_empty_row():
    blocks = [[sp.identity(2), None], [None, None]]
    with pytest.raises(ShapeMismatch):
        compose(blocks, [np.zeros(2), np.zeros(2)])


def test_solve_spd_2x2():
    A = sp.csr_matrix(np.diag([2.0, 3.0]))
    x, res = solve(A, np.array([2.0, 3.0]))
    assert np.allclose(x, [1.0, 1.0], atol=1e-15)
    assert res < 1e-15


def test_solve_singular_raises():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SingularMatrix):
        solve(A, np.ones(2))


def test_factorization_reuse():
    rng = np.random.default_rng(11)
    dense = rng.standard_normal((20, 20)) + 20.0 * np.eye(20)
    A = sp.csr_matrix(dense)
    lu = Factorization(A)
    for seed in range(3):
        b = np.random.default_rng(seed).standard_normal(20)
        x = lu.solve(b)
        assert relative_residual(A, x, b) < 1e-12


def test_iterative_solve_and_no_convergence():
    # diagonally dominant system converges fast
    n = 50
    main = 4.0 * np.ones(n)
    off = -1.0 * np.ones(n - 1)
    A = sp.diags([off, main, off], [-1, 0, 1], format="csr")
    b = np.ones(n)
    x, res = solve(A, b, method="iterative", tol=1e-12, maxit=200)
    assert res < 1e-11
    # one iteration cannot reach the target on a shifted random system
    rng = np.random.default_rng(3)
    R = sp.csr_matrix(rng.standard_normal((40, 40)) + 8.0 * np.eye(40))
    with pytest.raises(NoConvergence):
        solve(R, np.ones(40), method="iterative", tol=1e-30, maxit=1)


def test_export_matrix_round_trip(tmp_path):
    A = sp.csr_matrix(np.array([[1.5, 0.0], [0.0, -2.0]]))
    path = tmp_path / "mat.mtx"
    export_matrix(A, path)
    back = scipy.io.mmread(path)
    assert np.allclose(back.toarray(), A.toarray(), atol=0.0)
