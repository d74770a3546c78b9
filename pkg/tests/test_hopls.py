import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import orthonormal
from tensorpls.decomp import hooi_rank1, pinv
from tensorpls.hopls import (
    Centering, _project_out, cov_tensor, hopls_fit, ols_fit, predict,
)
from tensorpls.tensor import ShapeError, contract_all, frobenius_norm, mode_multiply, outer3


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def random_pair(seed, n=30, dims=(8, 4, 3), noise=1.0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, dims[0]))
    B = rng.standard_normal(dims)
    Y = mode_multiply(B, X, 1) + noise * rng.standard_normal((n,) + dims[1:])
    return X, Y


def eigen_design(seed, n=50, dims=(6, 5, 4), theta=3.0):
    """Noiseless rank-1 model whose first-mode loading is an eigenvector of X^T X."""
    rng = np.random.default_rng(seed)
    d1 = dims[0]
    V = orthonormal(rng, d1, d1)
    s = np.linspace(3.0, 1.0, d1)
    X = (orthonormal(rng, n, d1) * np.sqrt(n) * s) @ V.T
    u = [V[:, 0]] + [orthonormal(rng, d, 1)[:, 0] for d in dims[1:]]
    B = theta * outer3(*u)
    return X, mode_multiply(B, X, 1), B


# -- covariance tensor ----------------------------------------------------------

def test_cov_tensor_identity_design():
    Y = np.random.default_rng(0).standard_normal((4, 3, 2))
    np.testing.assert_allclose(cov_tensor(Y, np.eye(4)), Y / 4)


def test_cov_tensor_orthonormal_design_recovers_projection():
    rng = np.random.default_rng(1)
    n, d1 = 20, 6
    Xs = orthonormal(rng, n, d1) * np.sqrt(n)  # X^T X / n = I
    B = rng.standard_normal((d1, 3, 2))
    S = cov_tensor(mode_multiply(B, Xs, 1), Xs)
    np.testing.assert_allclose(S, B, atol=1e-12)
    # loop oracle
    Y = rng.standard_normal((n, 3, 2))
    S = cov_tensor(Y, Xs)
    for i in range(d1):
        for j in range(3):
            for k in range(2):
                assert S[i, j, k] == pytest.approx(sum(Xs[t, i] * Y[t, j, k] for t in range(n)) / n)


def test_cov_tensor_zero_and_mismatch():
    assert not np.any(cov_tensor(np.zeros((5, 2, 2)), np.ones((5, 3))))
    with pytest.raises(ShapeError):
        cov_tensor(np.zeros((5, 2, 2)), np.ones((4, 3)))


# -- fitting --------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_noiseless_rank_one_recovery(seed):
    X, Y, B = eigen_design(seed)
    model = hopls_fit(Y, X, 1)
    assert rel(model.B, B) <= 1e-6
    np.testing.assert_allclose(predict(model, X), Y, atol=1e-6 * np.abs(Y).max())


def test_k1_matches_closed_form():
    X, Y = random_pair(2)
    model = hopls_fit(Y, X, 1)
    S = cov_tensor(Y, X)
    SX = X.T @ X / X.shape[0]
    q1, q2, q3 = hooi_rank1(S).loadings
    g = contract_all(S, q1, q2, q3)
    B = g / (q1 @ SX @ q1) * outer3(q1, q2, q3)
    assert rel(model.B, B) <= 1e-10


@pytest.mark.parametrize("K", [2, 3, 5])
def test_coefficient_equals_sum_of_projections(K):
    X, Y = random_pair(3)
    m = hopls_fit(Y, X, K)
    S = cov_tensor(Y, X)
    SX = X.T @ X / X.shape[0]
    B = np.zeros_like(S)
    for k in range(K):
        w = m.W[:, k]
        P1 = np.outer(w, w) / (w @ SX @ w)
        P2 = np.outer(m.Q2[:, k], m.Q2[:, k])
        P3 = np.outer(m.Q3[:, k], m.Q3[:, k])
        B += mode_multiply(mode_multiply(mode_multiply(S, P1, 1), P2, 2), P3, 3)
    assert rel(m.B, B) <= 1e-8
    for Q in (m.Q2, m.Q3):
        np.testing.assert_allclose(np.linalg.norm(Q, axis=0), 1, atol=1e-10)


def test_scores_orthogonal_and_deflation_exact():
    X, Y = random_pair(4, n=40)
    m = hopls_fit(Y, X, 4)
    G = m.T_scores.T @ m.T_scores
    off = G - np.diag(np.diag(G))
    assert np.linalg.norm(off) <= 1e-8 * np.linalg.norm(np.diag(G))
    S = cov_tensor(Y, X)
    Yk = _project_out(m.T_scores, Y)
    assert frobenius_norm(cov_tensor(Yk, m.T_scores)) <= 1e-8 * frobenius_norm(S)
    # X W reproduces the scores
    np.testing.assert_allclose(X @ m.W, m.T_scores, atol=1e-8 * np.abs(m.T_scores).max())


def test_training_residual_nonincreasing_in_K():
    X, Y = random_pair(5, n=40)
    res = [frobenius_norm(Y - predict(hopls_fit(Y, X, K), X)) for K in range(1, 7)]
    assert all(b <= a * (1 + 1e-10) for a, b in zip(res, res[1:]))


def test_K_out_of_range():
    X, Y = random_pair(6, n=5, dims=(8, 2, 2))
    with pytest.raises(ValueError):
        hopls_fit(Y, X, 6)
    with pytest.raises(ValueError):
        hopls_fit(Y, X, 0)


def test_rank_collapse_truncates_with_warning():
    X, Y, B = eigen_design(7)
    with pytest.warns(UserWarning, match="stopped"):
        m = hopls_fit(Y, X, 3)
    assert m.K == 1 and m.truncated and m.requested_K == 3
    assert m.W.shape == (X.shape[1], 1)
    assert rel(m.B, B) <= 1e-6


def test_zero_response_gives_zero_model():
    with pytest.warns(UserWarning):
        m = hopls_fit(np.zeros((6, 2, 2)), np.ones((6, 3)), 2)
    assert m.K == 0 and not np.any(m.B)


def test_deterministic():
    X, Y = random_pair(8)
    a, b = hopls_fit(Y, X, 3), hopls_fit(Y, X, 3)
    assert np.array_equal(a.B, b.B) and np.array_equal(a.W, b.W)


def test_matrix_response_via_length_one_mode():
    X, Y = random_pair(9, dims=(5, 4, 1))
    m = hopls_fit(Y, X, 2)
    assert m.B.shape == (5, 4, 1)


# -- prediction and least squares --------------------------------------------------

def test_predict_cases():
    X, Y = random_pair(10)
    m = hopls_fit(Y, X, 2)
    assert not np.any(predict(m, np.zeros((3, X.shape[1]))))
    two = predict(m, X[:2])
    np.testing.assert_allclose(predict(m, X[:1])[0], two[0])
    with pytest.raises(ShapeError):
        predict(m, np.zeros((2, X.shape[1] + 1)))


def test_ols_cases():
    rng = np.random.default_rng(11)
    n, d1 = 30, 5
    X = rng.standard_normal((n, d1))
    B = rng.standard_normal((d1, 3, 2))
    np.testing.assert_allclose(ols_fit(mode_multiply(B, X, 1), X), B, atol=1e-10)
    assert not np.any(ols_fit(np.zeros((n, 3, 2)), X))
    Q = orthonormal(rng, n, d1)
    Y = rng.standard_normal((n, 3, 2))
    np.testing.assert_allclose(ols_fit(Y, Q), n * cov_tensor(Y, Q), atol=1e-12)


@given(st.integers(0, 2**31))
@settings(max_examples=15, deadline=None)
def test_ols_is_least_squares(seed):
    X, Y = random_pair(seed, n=12, dims=(4, 2, 2))
    Bh = ols_fit(Y, X)
    base = frobenius_norm(Y - mode_multiply(Bh, X, 1))
    rng = np.random.default_rng(seed)
    for _ in range(3):
        Bp = Bh + 1e-3 * rng.standard_normal(Bh.shape)
        assert frobenius_norm(Y - mode_multiply(Bp, X, 1)) >= base


def test_centering_round_trip():
    X, Y = random_pair(12)
    c = Centering.fit(X, Y + 5)
    np.testing.assert_allclose(c.transform_x(X).mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(c.transform_y(Y + 5).mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(c.restore_y(c.transform_y(Y + 5)), Y + 5)


def test_pinv_used_for_singular_scores():
    # duplicated columns make X^T X singular; the fit must still succeed
    rng = np.random.default_rng(13)
    X = rng.standard_normal((10, 3))
    X = np.column_stack([X, X[:, 0]])
    Y = rng.standard_normal((10, 2, 2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = hopls_fit(Y, X, 4)
    assert np.all(np.isfinite(m.B))
    assert np.all(np.isfinite(pinv(m.T_scores.T @ m.T_scores)))
