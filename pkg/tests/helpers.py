"""Planted designs and brute-force oracles shared by the tests."""

import numpy as np

from tensorpls.tensor import outer3


def unit_on(d, idx, rng=None, equal=True):
    """Unit vector of length ``d`` supported on ``idx``."""
    v = np.zeros(d)
    if equal:
        v[idx] = 1.0
    else:
        v[idx] = rng.uniform(0.5, 1.5, len(idx)) * rng.choice([-1, 1], len(idx))
    return v / np.linalg.norm(v)


def orthonormal(rng, n, k):
    Q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    return Q


def planted_sparse(seed, dims=(60, 32, 32), n=200, supports=(10, 8, 8), theta=(6.0, 2.0),
                   spike=8.0):
    """Noiseless sparse rank-2 model ``Y = B x_1 X`` whose first-mode loadings
    are eigenvectors of the covariate Gram matrix.

    Each component owns a disjoint slice of every support. The active block of
    ``X`` is ``Z diag(s) V^T`` with ``Z^T Z = n I`` and ``V`` orthonormal with
    the two first-mode loadings as leading columns (scale ``spike``); inactive
    columns are i.i.d. standard normal.
    """
    rng = np.random.default_rng(seed)
    d1, d2, d3 = dims
    R = len(theta)
    picks = [rng.choice(d, s, replace=False) for d, s in zip(dims, supports)]
    groups = [np.array_split(p, R) for p in picks]
    U = [np.column_stack([unit_on(d, g[r]) for r in range(R)]) for d, g in zip(dims, groups)]
    B = sum(theta[r] * outer3(U[0][:, r], U[1][:, r], U[2][:, r]) for r in range(R))

    act = np.sort(picks[0])
    a = act.size
    lead = U[0][act]  # a x R, orthonormal columns
    rest = orthonormal(rng, a, a)
    rest = rest - lead @ (lead.T @ rest)
    V = np.column_stack([lead, np.linalg.qr(rest)[0][:, : a - R]])
    s = np.ones(a)
    s[:R] = spike
    Z = orthonormal(rng, n, a) * np.sqrt(n)
    X = rng.standard_normal((n, d1))
    X[:, act] = (Z * s) @ V.T
    Y = np.einsum("ni,ijk->njk", X, B)
    return X, Y, B, tuple(np.sort(p) for p in picks)


def loop_mode_multiply(T, A, m):
    d = list(T.shape)
    d[m - 1] = A.shape[0]
    out = np.zeros(d)
    for i in range(d[0]):
        for j in range(d[1]):
            for k in range(d[2]):
                idx = [i, j, k]
                tot = 0.0
                for r in range(T.shape[m - 1]):
                    src = list(idx)
                    src[m - 1] = r
                    tot += A[idx[m - 1], r] * T[tuple(src)]
                out[i, j, k] = tot
    return out


def unfold_position(i, j, k, dims, m):
    """Row and column of entry (i, j, k) (0-based) in the mode-m unfolding,
    from the 1-based index formulas."""
    d1, d2, d3 = dims
    i1, j1, k1 = i + 1, j + 1, k + 1
    if m == 1:
        return (j1 - 1) * d3 + k1 - 1, i
    if m == 2:
        return (k1 - 1) * d1 + i1 - 1, j
    return (i1 - 1) * d2 + j1 - 1, k
