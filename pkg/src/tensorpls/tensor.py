"""Dense third-order tensor algebra.

Tensors are plain ``numpy.ndarray`` objects of shape ``(d1, d2, d3)``.
Modes are numbered 1, 2, 3. Index sets are 0-based integer arrays.

Unfolding convention: the mode-m unfolding has shape
``(prod_{i != m} d_i, d_m)``, with entry ``y[i, j, k]`` stored at

* mode 1: row ``j * d3 + k``, column ``i``
* mode 2: row ``k * d1 + i``, column ``j``
* mode 3: row ``i * d2 + j``, column ``k``

i.e. the remaining two indices are taken in cyclic order after ``m``, the
first of them varying slowest.
"""

import numpy as np

MODES = (1, 2, 3)

# axis permutation bringing (cyclic successors of m) to the front, m last
_UNFOLD_PERM = {1: (1, 2, 0), 2: (2, 0, 1), 3: (0, 1, 2)}


class ShapeError(ValueError):
    """Raised on inconsistent tensor/matrix dimensions."""


def _check_mode(m):
    if m not in MODES:
        raise ValueError(f"mode must be 1, 2 or 3, got {m!r}")


def as_tensor3(T):
    """Return ``T`` as a float64 3-d array, rejecting other ranks."""
    T = np.asarray(T, dtype=np.float64)
    if T.ndim != 3:
        raise ShapeError(f"expected a third-order tensor, got ndim={T.ndim}")
    return T


def other_modes(m):
    """The two modes other than ``m``, in cyclic order."""
    _check_mode(m)
    return (m % 3 + 1, (m + 1) % 3 + 1)


def mode_multiply(T, A, m):
    """Mode-m product ``T x_m A``.

    Contracts the m-th index of ``T`` against the columns of ``A``, so the
    result has ``d_m`` replaced by ``A.shape[0]``.
    """
    _check_mode(m)
    T = as_tensor3(T)
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[1] != T.shape[m - 1]:
        raise ShapeError(
            f"matrix of shape {A.shape} cannot multiply mode {m} of a tensor "
            f"with dims {T.shape}"
        )
    out = np.tensordot(A, T, axes=(1, m - 1))  # new axis first
    return np.ascontiguousarray(np.moveaxis(out, 0, m - 1))


def unfold(T, m):
    """Mode-m unfolding, shape ``(prod_{i != m} d_i, d_m)``."""
    _check_mode(m)
    T = as_tensor3(T)
    perm = _UNFOLD_PERM[m]
    return np.ascontiguousarray(T.transpose(perm).reshape(-1, T.shape[m - 1]))


def fold(M, m, dims):
    """Inverse of :func:`unfold`."""
    _check_mode(m)
    M = np.asarray(M, dtype=np.float64)
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise ShapeError(f"dims must be three positive integers, got {dims}")
    perm = _UNFOLD_PERM[m]
    rows = dims[perm[0]] * dims[perm[1]]
    if M.shape != (rows, dims[m - 1]):
        raise ShapeError(
            f"matrix of shape {M.shape} is not a mode-{m} unfolding of dims {dims}"
        )
    permuted = M.reshape(dims[perm[0]], dims[perm[1]], dims[perm[2]])
    return np.ascontiguousarray(permuted.transpose(np.argsort(perm)))


def frobenius_norm(T):
    return float(np.sqrt(np.sum(np.square(T, dtype=np.float64))))


def outer3(u, v, w):
    """Rank-one tensor with entries ``u[i] * v[j] * w[k]``."""
    u, v, w = (np.asarray(x, dtype=np.float64).ravel() for x in (u, v, w))
    return u[:, None, None] * v[None, :, None] * w[None, None, :]


def kron(u, v):
    """Kronecker product of two vectors; ``u`` varies slowest."""
    return np.kron(np.ravel(u), np.ravel(v)).astype(np.float64, copy=False)


def kron_except(loadings, m):
    """Kronecker product of the loadings of the two modes other than ``m``.

    The factor order matches :func:`unfold`, so for a rank-one tensor
    ``theta * a o b o c`` the product ``unfold(., m).T @ kron_except((a, b, c), m)``
    equals ``theta`` times the inner products of the other loadings with
    themselves, times the mode-m loading.
    """
    a, b = other_modes(m)
    return kron(loadings[a - 1], loadings[b - 1])


def contract_except(T, loadings, m):
    """Contract ``T`` with the loadings of every mode except ``m``.

    Returns a length-``d_m`` vector equal to ``T x_l q_l^T`` over ``l != m``.
    """
    return unfold(T, m).T @ kron_except(loadings, m)


def contract_all(T, q1, q2, q3):
    """Scalar ``T x_1 q1^T x_2 q2^T x_3 q3^T``."""
    T = as_tensor3(T)
    return float(np.ravel(q1) @ ((T @ np.ravel(q3)) @ np.ravel(q2)))


def superdiag(g):
    """K x K x K tensor with ``g[k]`` at position ``(k, k, k)``."""
    g = np.asarray(g, dtype=np.float64).ravel()
    K = g.size
    out = np.zeros((K, K, K))
    idx = np.arange(K)
    out[idx, idx, idx] = g
    return out


def _resolve(sel, d):
    if sel is None:
        return np.arange(d)
    idx = np.asarray(sel, dtype=np.intp).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= d):
        raise IndexError(f"index set {idx.tolist()} out of range for dimension {d}")
    return idx


def extract(T, sets):
    """Subtensor over the Cartesian product of per-mode index sets.

    ``sets`` holds one entry per mode: an integer array, or ``None`` for
    every index of that mode.
    """
    T = as_tensor3(T)
    if len(sets) != 3:
        raise ShapeError("extract needs one index set per mode")
    idx = [_resolve(s, d) for s, d in zip(sets, T.shape)]
    return np.ascontiguousarray(T[np.ix_(*idx)])


def scatter_back(sub, sets, dims):
    """Place ``sub`` into a zero tensor of ``dims`` (inverse of :func:`extract`)."""
    dims = tuple(int(d) for d in dims)
    idx = [_resolve(s, d) for s, d in zip(sets, dims)]
    sub = as_tensor3(sub)
    if sub.shape != tuple(len(i) for i in idx):
        raise ShapeError(f"subtensor dims {sub.shape} do not match index sets")
    out = np.zeros(dims)
    out[np.ix_(*idx)] = sub
    return out
