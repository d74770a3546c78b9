"""Sparse higher order partial least squares (SHOPS).

Each component first locates active index sets on every mode with a
sample-split, soft-then-hard thresholding search, then refits HOPLS on the
cumulative active sets and deflates the response.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .decomp import HooiOptions, hooi_rank1, pinv
from .hopls import _check_pair, cov_tensor, hopls_fit, predict
from .tensor import contract_except, extract, scatter_back

PHI_INV_34 = float(norm.ppf(0.75))
DEFAULT_NU0 = float(norm.ppf(0.95))


@dataclass(frozen=True)
class ThresholdSpec:
    """Soft-threshold multiplier ``nu0``, hard-threshold fraction ``nu`` and
    whether scales are estimated robustly (MAD) or by standard deviation."""

    nu: float = 0.5
    nu0: float = DEFAULT_NU0
    robust: bool = True

    def __post_init__(self):
        if not 0 < self.nu < 1:
            raise ValueError(f"nu must lie in (0, 1), got {self.nu}")
        if not self.nu0 >= 0:
            raise ValueError(f"nu0 must be nonnegative, got {self.nu0}")


@dataclass
class ActiveSetResult:
    sets: tuple
    scores: tuple = ()
    no_signal: bool = False


@dataclass
class ShopsModel:
    """Fitted SHOPS state after the last completed component.

    ``sets[k][m]`` is the active set found for component ``k`` and mode
    ``m + 1``; ``cumulative[k][m]`` the union over components ``<= k``.
    ``stage_B[k]`` is the full-size coefficient after ``k + 1`` components.
    """

    K: int
    B: np.ndarray
    W: np.ndarray
    sets: list
    cumulative: list
    stage_B: list
    reduced: list
    tau: list
    spec: ThresholdSpec
    seed: object = None
    truncated: bool = False
    requested_K: int = 0
    flags: list = field(default_factory=list)

    @property
    def active(self):
        """Final cumulative active sets, one index array per mode."""
        if not self.cumulative:
            return tuple(np.zeros(0, dtype=np.intp) for _ in range(3))
        return self.cumulative[-1]

    def predict(self, Xnew):
        return predict(self, Xnew)


def soft_threshold(S, t):
    """Entrywise soft thresholding: shrink toward zero by ``t``."""
    if t < 0:
        raise ValueError(f"threshold must be nonnegative, got {t}")
    S = np.asarray(S, dtype=np.float64)
    return np.sign(S) * np.maximum(np.abs(S) - t, 0.0)


def split_samples(n, rng):
    """Random disjoint halves of ``range(n)`` with sizes ``ceil(n/2)``, ``floor(n/2)``."""
    if n < 4:
        raise ValueError(f"sample splitting needs n >= 4, got {n}")
    perm = rng.permutation(n)
    n1 = (n + 1) // 2
    return np.sort(perm[:n1]), np.sort(perm[n1:])


def _mad(x):
    x = np.ravel(x)
    return float(np.median(np.abs(x - np.median(x))))


def _column_scale(X, robust):
    """Per-column scale of ``X`` and the number of MAD fallbacks."""
    sd = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.zeros(X.shape[1])
    if not robust:
        return sd, 0
    med = np.median(X, axis=0)
    mad = np.median(np.abs(X - med), axis=0) / PHI_INV_34
    bad = mad == 0
    return np.where(bad, sd, mad), int(bad.sum())


def estimate_tau(Y, X, spec, n1):
    """Soft-threshold level ``tau = nu0 * sqrt(n1) * sigma_hat``.

    ``sigma_hat`` estimates the null standard deviation of a half-sample
    covariance entry as ``median_i scale(X_i) * scale(Y) / sqrt(n1)``, with
    ``scale`` the normal-consistent MAD (or the standard deviation when
    ``spec.robust`` is off). Returns ``(tau, n_fallback)`` where
    ``n_fallback`` counts columns of ``X`` whose MAD was zero.
    """
    Y, X = _check_pair(Y, X)
    xs, fallback = _column_scale(X, spec.robust)
    if spec.robust:
        ys = _mad(Y) / PHI_INV_34
    else:
        ys = float(np.std(Y, ddof=1))
    sigma = float(np.median(xs)) * ys / math.sqrt(n1)
    return spec.nu0 * math.sqrt(n1) * sigma, fallback


def hard_threshold(scores, nu):
    """Indices with ``|score| > nu * max |score|``; empty if all scores vanish."""
    a = np.abs(np.asarray(scores, dtype=np.float64))
    top = a.max(initial=0.0)
    if top == 0:
        return np.zeros(0, dtype=np.intp)
    return np.flatnonzero(a > nu * top)


def active_set_find(Y, X, tau, nu, rng, opts=None):
    """Active sets of one component from a single random sample split.

    The first half gives a soft-thresholded covariance tensor whose HOOI
    loadings are contracted against the second-half covariance tensor; each
    mode keeps the indices whose contracted score exceeds ``nu`` times the
    largest one.
    """
    Y, X = _check_pair(Y, X)
    om1, om2 = split_samples(X.shape[0], rng)
    n1 = om1.size
    S = cov_tensor(Y[om1], X[om1])
    S2 = cov_tensor(Y[om2], X[om2])
    eta = soft_threshold(S, tau / math.sqrt(n1))
    empty = tuple(np.zeros(0, dtype=np.intp) for _ in range(3))
    if not np.any(eta):
        return ActiveSetResult(empty, no_signal=True)
    q = hooi_rank1(eta, opts).loadings
    scores = tuple(contract_except(S2, q, m) for m in (1, 2, 3))
    sets = tuple(hard_threshold(s, nu) for s in scores)
    return ActiveSetResult(sets, scores, no_signal=any(s.size == 0 for s in sets))


def deflate_response(Y, X, W):
    """``Y x_1 (I - X W (W^T X^T X W)^+ W^T X^T)``: remove the part of ``Y``
    explained by the components ``X W``."""
    Y, X = _check_pair(Y, X)
    W = np.asarray(W, dtype=np.float64)
    if W.size == 0 or not np.any(W):
        return Y.copy()
    Z = X @ W
    flat = Y.reshape(Y.shape[0], -1)
    coef = pinv(Z.T @ Z) @ (Z.T @ flat)
    return (flat - Z @ coef).reshape(Y.shape)


def shops_fit(Y, X, K, spec=None, opts=None, rng=None):
    """Fit ``K`` SHOPS components.

    ``rng`` is a ``numpy.random.Generator`` or a seed; a fresh sample split
    is drawn for every component. Stops early (with a warning) when the
    cumulative covariate set is still empty.
    """
    Y, X = _check_pair(Y, X)
    spec = spec or ThresholdSpec()
    opts = opts or HooiOptions()
    seed = rng if not isinstance(rng, np.random.Generator) else None
    rng = np.random.default_rng(rng)
    K = int(K)
    if K < 1:
        raise ValueError("K must be >= 1")
    n, d1 = X.shape
    dims = (d1,) + Y.shape[1:]
    n1 = (n + 1) // 2

    cum = [np.zeros(0, dtype=np.intp) for _ in range(3)]
    sets, cumulative, stage_B, reduced, taus, flags = [], [], [], [], [], []
    Yk = Y
    B = np.zeros(dims)
    W = np.zeros((d1, 0))
    truncated = False
    for k in range(1, K + 1):
        tau, fallback = estimate_tau(Yk, X, spec, n1)
        if fallback:
            flags.append(f"component {k}: {fallback} covariate(s) with zero MAD used s.d.")
        found = active_set_find(Yk, X, tau, spec.nu, rng, opts)
        if found.no_signal:
            flags.append(f"component {k}: no signal in active-set search")
        cum = [np.union1d(c, s).astype(np.intp) for c, s in zip(cum, found.sets)]
        if any(c.size == 0 for c in cum):
            warnings.warn(f"SHOPS stopped at component {k}: empty cumulative active set")
            truncated = True
            break
        Xr = np.ascontiguousarray(X[:, cum[0]])
        Yr = extract(Y, (None, cum[1], cum[2]))
        k_fit = min(k, n, cum[0].size)
        if k_fit < k:
            flags.append(f"component {k}: reduced HOPLS limited to {k_fit} components")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sub = hopls_fit(Yr, Xr, k_fit, opts)
        if sub.K == 0:
            warnings.warn(f"SHOPS stopped at component {k}: reduced HOPLS found no signal")
            truncated = True
            break
        if sub.K < k:
            truncated = True
        B = scatter_back(sub.B, cum, dims)
        W = np.zeros((d1, sub.K))
        W[cum[0]] = sub.W
        sets.append(found.sets)
        cumulative.append(tuple(c.copy() for c in cum))
        stage_B.append(B)
        reduced.append(sub)
        taus.append(tau)
        if k < K:
            Yk = deflate_response(Y, X, W)

    return ShopsModel(
        len(stage_B), B, W, sets, cumulative, stage_B, reduced, taus, spec,
        seed, truncated, K, flags,
    )


def shops_predict(model, Xnew):
    return predict(model, Xnew)
