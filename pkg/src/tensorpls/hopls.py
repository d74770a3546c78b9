"""Higher order partial least squares (HOPLS) for a tensor response
``Y`` (n x d2 x d3) and a covariate matrix ``X`` (n x d1).

The fit works on whatever data it is given; centering is left to the
caller (see :class:`Centering`).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .decomp import HooiOptions, hooi_rank1, pinv
from .tensor import ShapeError, as_tensor3, contract_all, frobenius_norm, mode_multiply

# relative size of the cross-covariance below which deflation is treated as exhausted
COLLAPSE_RTOL = 1e-12


def _as_matrix(X, name="X"):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"{name} must be a matrix, got ndim={X.ndim}")
    return X


def _check_pair(Y, X):
    Y = as_tensor3(Y)
    X = _as_matrix(X)
    if Y.shape[0] != X.shape[0]:
        raise ShapeError(
            f"Y has {Y.shape[0]} samples along mode 1 but X has {X.shape[0]} rows"
        )
    return np.ascontiguousarray(Y), np.ascontiguousarray(X)


def cov_tensor(Y, X):
    """Sample cross-covariance tensor ``Y x_1 X^T / n`` of shape (d1, d2, d3)."""
    Y, X = _check_pair(Y, X)
    n = X.shape[0]
    return (X.T @ Y.reshape(n, -1)).reshape(X.shape[1], *Y.shape[1:]) / n


def _project_out(T, A):
    """``(I - T T^+) A`` for a score matrix ``T`` and row-indexed array ``A``."""
    flat = A.reshape(A.shape[0], -1)
    return (flat - T @ (pinv(T) @ flat)).reshape(A.shape)


@dataclass
class Centering:
    """Column means of ``X`` and mode-1 means of ``Y`` from training data."""

    x_mean: np.ndarray
    y_mean: np.ndarray

    @classmethod
    def fit(cls, X, Y):
        Y, X = _check_pair(Y, X)
        return cls(X.mean(axis=0), Y.mean(axis=0))

    def transform_x(self, X):
        return _as_matrix(X) - self.x_mean

    def transform_y(self, Y):
        return as_tensor3(Y) - self.y_mean

    def restore_y(self, Yc):
        return as_tensor3(Yc) + self.y_mean


@dataclass
class HoplsModel:
    """Fitted HOPLS state. ``K`` may be smaller than requested when the
    deflated cross-covariance is exhausted (``truncated`` is then set)."""

    K: int
    W: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    Q3: np.ndarray
    T_scores: np.ndarray
    P: np.ndarray
    G: np.ndarray
    B: np.ndarray
    hooi: list = field(default_factory=list)
    truncated: bool = False
    requested_K: int = 0

    def predict(self, Xnew):
        return predict(self, Xnew)


def _coefficient(S, SX, W, Q2, Q3):
    """Core weights ``g`` and ``B = G x_1 W (W^T S_X W)^{-1} x_2 Q2 x_3 Q3``."""
    K = W.shape[1]
    g = np.array([contract_all(S, W[:, k], Q2[:, k], Q3[:, k]) for k in range(K)])
    M = W @ pinv(W.T @ SX @ W)
    B = np.einsum("ik,jk,lk->ijl", M * g, Q2, Q3, optimize=True)
    return g, np.ascontiguousarray(B)


def hopls_fit(Y, X, K, opts=None):
    """Fit ``K`` HOPLS components.

    Each component takes the rank-(1,1,1) HOOI loadings of the current
    cross-covariance tensor, adds the score ``X_k q1`` and then deflates the
    original ``Y`` and ``X`` by the projector onto the orthocomplement of all
    scores so far. The coefficient tensor is assembled from
    ``W = Q1 (P^T Q1)^+`` with ``P = X^T T (T^T T)^+``.
    """
    Y, X = _check_pair(Y, X)
    opts = opts or HooiOptions()
    n, d1 = X.shape
    K = int(K)
    if K < 1 or K > min(n, d1):
        raise ValueError(f"K={K} must lie in [1, min(n, d1)={min(n, d1)}]")

    S = cov_tensor(Y, X)
    ref = frobenius_norm(S)
    Yk, Xk = Y, X
    scores, q1s, q2s, q3s, hooi = [], [], [], [], []
    truncated = False
    for _ in range(K):
        Sk = S if not scores else cov_tensor(Yk, Xk)
        if ref == 0 or frobenius_norm(Sk) <= COLLAPSE_RTOL * ref:
            truncated = True
            break
        res = hooi_rank1(Sk, opts)
        t = Xk @ res.q1
        if np.linalg.norm(t) <= COLLAPSE_RTOL * np.linalg.norm(X):
            truncated = True
            break
        scores.append(t)
        q1s.append(res.q1)
        q2s.append(res.q2)
        q3s.append(res.q3)
        hooi.append(res)
        T = np.column_stack(scores)
        Yk = _project_out(T, Y)
        Xk = _project_out(T, X)

    Ka = len(scores)
    if Ka == 0:
        warnings.warn("HOPLS found no cross-covariance signal; returning zero model")
        d2, d3 = Y.shape[1:]
        empty = np.zeros((0,))
        return HoplsModel(
            0, np.zeros((d1, 0)), np.zeros((d1, 0)), np.zeros((d2, 0)),
            np.zeros((d3, 0)), np.zeros((n, 0)), np.zeros((d1, 0)), empty,
            np.zeros((d1, d2, d3)), [], True, K,
        )
    if truncated:
        warnings.warn(f"HOPLS stopped after {Ka} of {K} components (signal exhausted)")

    T = np.column_stack(scores)
    Q1, Q2, Q3 = (np.column_stack(q) for q in (q1s, q2s, q3s))
    P = X.T @ T @ pinv(T.T @ T)
    W = Q1 @ pinv(P.T @ Q1)
    g, B = _coefficient(S, X.T @ X / n, W, Q2, Q3)
    return HoplsModel(Ka, W, Q1, Q2, Q3, T, P, g, B, hooi, truncated, K)


def predict(model, Xnew):
    """Predicted response ``B x_1 Xnew``."""
    B = model.B if hasattr(model, "B") else as_tensor3(model)
    Xnew = _as_matrix(Xnew, "Xnew")
    if Xnew.shape[1] != B.shape[0]:
        raise ShapeError(f"Xnew has {Xnew.shape[1]} columns, model expects {B.shape[0]}")
    return mode_multiply(B, Xnew, 1)


def ols_fit(Y, X):
    """Least-squares coefficient ``Y x_1 X^+`` (minimum norm when n <= d1)."""
    Y, X = _check_pair(Y, X)
    return mode_multiply(Y, pinv(X), 1)
