"""Choosing the number of components and the hard-threshold fraction."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .decomp import HooiOptions, sym_eigen_desc
from .hopls import Centering, _check_pair, predict
from .sparse import ThresholdSpec, shops_fit

DEFAULT_NU_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))

# gap, relative to the zero-model error, under which two CV errors count as tied
TIE_RTOL = 1e-8


def elbow_from_eigenvalues(vals):
    """Number of eigenvalues before the sharpest bend of a descending scree.

    The bend is where the discrete second difference
    ``vals[i-1] - 2 vals[i] + vals[i+1]`` peaks; everything before that
    point counts as a spike.
    """
    vals = np.asarray(vals, dtype=np.float64)
    if vals.size < 3:
        return 1
    second = vals[:-2] - 2 * vals[1:-1] + vals[2:]
    if second.max() <= 0:
        return 1
    return int(np.argmax(second)) + 1


def elbow_K(X):
    """Upper bound for the number of components from the scree of ``X^T X / n``,
    clamped to ``[1, min(n, d1) - 1]``."""
    X = np.asarray(X, dtype=np.float64)
    n, d1 = X.shape
    if n < 2:
        raise ValueError("elbow_K needs at least two samples")
    vals, _ = sym_eigen_desc(X.T @ X / n)
    K = elbow_from_eigenvalues(vals)
    return max(1, min(K, min(n, d1) - 1))


def fold_indices(n, folds, rng):
    """Random partition of ``range(n)`` into ``folds`` nearly equal parts."""
    if folds < 2 or folds > n:
        raise ValueError(f"need 2 <= folds <= n, got folds={folds}, n={n}")
    perm = np.random.default_rng(rng).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


@dataclass
class CvResult:
    """Cross-validation table over ``(K, nu)``.

    ``errors[f, i, k]`` is the held-out error of fold ``f`` for
    ``nu_grid[i]`` and ``k + 1`` components (NaN when that fold's fit
    stopped early).
    """

    K_values: np.ndarray
    nu_grid: np.ndarray
    errors: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    best_K: int
    best_nu: float
    folds: list
    seed: object
    n_fits: int = 0
    flags: list = field(default_factory=list)

    def rows(self):
        """``(K, nu, mean, se)`` tuples, K-major."""
        return [
            (int(K), float(nu), float(self.mean[i, k]), float(self.se[i, k]))
            for k, K in enumerate(self.K_values)
            for i, nu in enumerate(self.nu_grid)
        ]


def _heldout_error(B, Xv, Yv):
    R = Yv - predict(B, Xv)
    return float(np.linalg.norm(R) / math.sqrt(Xv.shape[0]))


def cross_validate(Y, X, K_max, nu_grid=DEFAULT_NU_GRID, folds=5, spec=None,
                   opts=None, rng=None, n_jobs=1):
    """Joint CV over the number of components and the hard-threshold fraction.

    For each fold and ``nu``, one SHOPS fit with ``K_max`` components yields
    the coefficients of every smaller ``K``. Each fold is centered with its
    own training means. The chosen pair has the lowest mean held-out error
    ``||Y_val - B_k x_1 X_val||_F / sqrt(n_val)``; near-ties go to the
    smaller ``K`` and then the smaller ``nu``.
    """
    Y, X = _check_pair(Y, X)
    spec = spec or ThresholdSpec()
    opts = opts or HooiOptions()
    nu_grid = np.asarray(nu_grid, dtype=np.float64)
    if nu_grid.size == 0 or np.any(nu_grid <= 0) or np.any(nu_grid >= 1):
        raise ValueError("nu_grid must be a nonempty subset of (0, 1)")
    K_max = int(K_max)
    if K_max < 1:
        raise ValueError("K_max must be >= 1")
    if isinstance(rng, np.random.Generator):
        seed = int(rng.integers(2**63))
    else:
        seed = 0 if rng is None else rng
    seed_seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    fold_rng, cell_root = seed_seq.spawn(2)
    parts = fold_indices(X.shape[0], folds, np.random.default_rng(fold_rng))
    cell_seeds = cell_root.spawn(folds * nu_grid.size)

    def cell(f, i):
        val = parts[f]
        train = np.setdiff1d(np.arange(X.shape[0]), val)
        c = Centering.fit(X[train], Y[train])
        cell_spec = ThresholdSpec(nu=float(nu_grid[i]), nu0=spec.nu0, robust=spec.robust)
        model = shops_fit(
            c.transform_y(Y[train]), c.transform_x(X[train]), K_max, cell_spec, opts,
            np.random.default_rng(cell_seeds[f * nu_grid.size + i]),
        )
        Xv, Yv = c.transform_x(X[val]), c.transform_y(Y[val])
        errs = np.full(K_max, np.nan)
        for k, B in enumerate(model.stage_B):
            errs[k] = _heldout_error(B, Xv, Yv)
        null = float(np.linalg.norm(Yv) / math.sqrt(Xv.shape[0]))
        return f, i, errs, model.truncated, null

    jobs = [(f, i) for f in range(folds) for i in range(nu_grid.size)]
    if n_jobs == 1:
        results = [cell(f, i) for f, i in jobs]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(lambda a: cell(*a), jobs))

    errors = np.full((folds, nu_grid.size, K_max), np.nan)
    flags = []
    nulls = np.zeros(folds)
    for f, i, errs, truncated, null in results:
        errors[f, i] = errs
        nulls[f] = null
        if truncated:
            flags.append(f"fold {f + 1}, nu={nu_grid[i]}: fit stopped early")
    counts = np.sum(~np.isnan(errors), axis=0)
    mean = _nanmean(errors)
    se = np.where(counts > 1, _nanstd(errors) / np.sqrt(np.maximum(counts, 1)), 0.0)

    best_K, best_nu = _argmin(mean, nu_grid, float(nulls.mean()))
    return CvResult(
        np.arange(1, K_max + 1), nu_grid, errors, mean, se, best_K, best_nu,
        parts, seed, n_fits=len(results), flags=flags,
    )


def _nanmean(a):
    cnt = np.sum(~np.isnan(a), axis=0)
    tot = np.nansum(a, axis=0)
    return np.where(cnt > 0, tot / np.maximum(cnt, 1), np.nan)


def _nanstd(a):
    cnt = np.sum(~np.isnan(a), axis=0)
    m = _nanmean(a)
    dev = np.nansum((a - m) ** 2, axis=0)
    return np.where(cnt > 1, np.sqrt(dev / np.maximum(cnt - 1, 1)), 0.0)


def _argmin(mean, nu_grid, scale=0.0):
    """``mean[i, k]`` over (nu index, K index): smallest error, ties to small K then small nu.

    Errors within ``TIE_RTOL * max(lo, scale)`` of the minimum ``lo`` tie;
    ``scale`` is the held-out error of the zero model, so that errors at
    rounding level on noiseless data still tie.
    """
    finite = np.isfinite(mean)
    if not finite.any():
        raise RuntimeError("no cross-validation cell produced an error estimate")
    lo = mean[finite].min()
    tied = finite & (mean <= lo + TIE_RTOL * max(abs(lo), scale, 1e-300))
    for k in range(mean.shape[1]):
        for i in range(mean.shape[0]):
            if tied[i, k]:
                return k + 1, float(nu_grid[i])
    raise AssertionError("unreachable")
