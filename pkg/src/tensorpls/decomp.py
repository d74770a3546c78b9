"""Leading singular triples, pseudoinverses, symmetric eigenproblems and
rank-(1,1,1) higher order orthogonal iteration (HOOI)."""

from dataclasses import dataclass, field

import numpy as np

from .tensor import as_tensor3, contract_all, unfold

PINV_RTOL = 1e-12


def sign_fix(v):
    """Flip ``v`` so its largest-magnitude entry is nonnegative.

    Ties resolve to the lowest index (``argmax`` semantics). Returns the
    flipped vector and the sign applied.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        return v, 1.0
    s = -1.0 if v[np.argmax(np.abs(v))] < 0 else 1.0
    return s * v, s


def _unit(d):
    e = np.zeros(d)
    e[0] = 1.0
    return e


def svd_leading(M):
    """Leading singular triple ``(u, sigma, v, degenerate)`` of ``M``.

    ``u`` follows :func:`sign_fix`; ``v`` is flipped along with it so that
    ``M @ v = sigma * u``. An all-zero matrix gives ``sigma = 0`` with unit
    basis vectors and ``degenerate=True``.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("svd_leading expects a matrix")
    r, c = M.shape
    if not np.any(M):
        return _unit(r), 0.0, _unit(c), True
    if min(r, c) >= 8 and max(r, c) >= 4 * min(r, c):
        # very rectangular: eigenvector of the small Gram matrix is far cheaper
        if r <= c:
            vals, vecs = np.linalg.eigh(M @ M.T)
            u, _ = sign_fix(vecs[:, -1])
            v = M.T @ u
        else:
            vals, vecs = np.linalg.eigh(M.T @ M)
            v = vecs[:, -1]
            u, sgn = sign_fix(M @ v)
            v = sgn * v
        sigma = float(np.linalg.norm(v if r <= c else M @ v))
        if sigma == 0:
            return _unit(r), 0.0, _unit(c), True
        if r <= c:
            return u, sigma, v / sigma, False
        return u / sigma, sigma, v, False
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    u, sgn = sign_fix(U[:, 0])
    return u, float(s[0]), sgn * Vt[0], False


def pinv(M, rtol=PINV_RTOL):
    """Moore-Penrose inverse via SVD, dropping singular values below
    ``rtol`` times the largest one."""
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0 or not np.any(M):
        return np.zeros(M.shape[::-1])
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    keep = s > rtol * s[0]
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def sym_eigen_desc(S, atol=1e-10):
    """Eigenvalues (descending) and matching eigenvectors of a symmetric matrix."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("sym_eigen_desc expects a square matrix")
    if not np.allclose(S, S.T, rtol=0.0, atol=atol * max(1.0, np.abs(S).max(initial=0.0))):
        raise ValueError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh((S + S.T) / 2)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


@dataclass(frozen=True)
class HooiOptions:
    """Stopping rule and initializer for :func:`hooi_rank1`.

    ``init`` is ``"hosvd"`` (leading singular vector of each unfolding) or
    ``"random"`` (Gaussian start drawn from ``seed``).
    """

    max_iterations: int = 200
    tolerance: float = 1e-9
    init: str = "hosvd"
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.init not in ("hosvd", "random"):
            raise ValueError(f"unknown HOOI initialization {self.init!r}")


@dataclass
class HooiResult:
    q1: np.ndarray
    q2: np.ndarray
    q3: np.ndarray
    core: float
    iterations: int
    converged: bool
    degenerate: bool = False
    objective: list = field(default_factory=list)

    @property
    def loadings(self):
        return (self.q1, self.q2, self.q3)


def _normalize(x, fallback=None):
    nrm = np.linalg.norm(x)
    if nrm > 0:
        return x / nrm
    return x if fallback is None else fallback


def hooi_rank1(T, opts=None):
    """Best rank-(1,1,1) approximation of ``T`` by alternating updates.

    Each sweep replaces one loading at a time by the normalized contraction of
    ``T`` with the other two, which can only increase ``|core|``. Iteration
    stops once every loading moves by less than ``opts.tolerance`` in
    Euclidean norm (after sign alignment) or after ``opts.max_iterations``
    sweeps. Returned loadings follow :func:`sign_fix`; ``core`` is
    ``T x_1 q1^T x_2 q2^T x_3 q3^T`` for those loadings.
    """
    opts = opts or HooiOptions()
    T = as_tensor3(T)
    d1, d2, d3 = T.shape
    if not np.any(T):
        return HooiResult(_unit(d1), _unit(d2), _unit(d3), 0.0, 0, True, degenerate=True)

    if opts.init == "hosvd":
        q = [svd_leading(unfold(T, m).T)[0] for m in (1, 2, 3)]
    else:
        rng = np.random.default_rng(opts.seed)
        q = [_normalize(rng.standard_normal(d)) for d in T.shape]

    objective = [abs(contract_all(T, *q))]
    converged = False
    it = 0
    while it < opts.max_iterations:
        it += 1
        old = [x.copy() for x in q]
        q[0] = _normalize((T @ q[2]) @ q[1], old[0])
        q[1] = _normalize(q[0] @ (T @ q[2]), old[1])
        q[2] = _normalize(np.tensordot(q[0], T, axes=(0, 0)).T @ q[1], old[2])
        obj = abs(contract_all(T, *q))
        assert obj >= objective[-1] * (1 - 1e-10) - 1e-300, "HOOI objective decreased"
        objective.append(obj)
        step = max(np.linalg.norm(n - np.sign(n @ o or 1.0) * o) for n, o in zip(q, old))
        if step < opts.tolerance:
            converged = True
            break

    q = [sign_fix(x)[0] for x in q]
    return HooiResult(
        q[0], q[1], q[2], contract_all(T, *q), it, converged, objective=objective
    )
