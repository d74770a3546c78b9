"""Synthetic tensor-response regression data.

Covariates follow a spiked model ``X = H Gamma^T + E`` whose ``K + 1``
orthonormal directions are blockwise constant. The coefficient tensor is
orthogonally decomposable: its first-mode loadings are built from the first
``K`` directions, and its second/third-mode loadings come from the SVD of a
binary 64 x 64 picture so that ``B[0]`` draws that picture.
"""

import math
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .decomp import sign_fix
from .tensor import mode_multiply

PATTERN_RANKS = {"square": 1, "cross": 2, "circle": 9, "bat": 14}


class MaskError(ValueError):
    """A pattern bitmap is malformed or has too small a rank."""


@dataclass(frozen=True)
class SimScenario:
    n: int = 120
    p: int = 240
    s: int = 30
    K: int = 3
    R: int = 1
    lam: float = 10.0
    sigma2: float = 2.0
    d2: int = 64
    d3: int = 64
    pattern: str = "square"
    theta1: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("n must be >= 4")
        if not 0 < self.s < self.p:
            raise ValueError("need 0 < s < p")
        if self.K < 3:
            raise ValueError("K must be >= 3 (K = 2 makes the block constant a1 zero)")
        if self.s % self.K:
            raise ValueError(f"s={self.s} must be divisible by K={self.K}")
        if not 1 <= self.R <= self.K:
            raise ValueError(f"need 1 <= R <= K, got R={self.R}, K={self.K}")
        if self.pattern in PATTERN_RANKS and PATTERN_RANKS[self.pattern] != self.R:
            raise ValueError(
                f"pattern {self.pattern!r} has rank {PATTERN_RANKS[self.pattern]}, not R={self.R}"
            )
        if self.sigma2 < 0 or self.lam < 0 or self.theta1 <= 0:
            raise ValueError("sigma2, lam must be >= 0 and theta1 > 0")

    @classmethod
    def for_pattern(cls, pattern, **kw):
        """Scenario with ``R`` and ``K`` implied by a named pattern
        (K = 3 for ranks up to 2, K = 15 otherwise)."""
        R = PATTERN_RANKS[pattern]
        kw.setdefault("K", 3 if R <= 2 else 15)
        return cls(pattern=pattern, R=R, **kw)

    def to_dict(self):
        return asdict(self)


@dataclass
class SimDesign:
    """Fixed (seed-independent) part of a scenario."""

    scenario: SimScenario
    Gamma: np.ndarray
    a: tuple
    B: np.ndarray
    U1: np.ndarray
    U2: np.ndarray
    U3: np.ndarray
    theta: np.ndarray
    mask: np.ndarray

    @property
    def active(self):
        """True active sets per mode (0-based)."""
        return tuple(np.flatnonzero(np.any(U != 0, axis=1)) for U in (self.U1, self.U2, self.U3))


@dataclass
class GroundTruth:
    design: SimDesign
    X: np.ndarray
    Y: np.ndarray

    @property
    def B(self):
        return self.design.B

    @property
    def Gamma(self):
        return self.design.Gamma

    @property
    def active(self):
        return self.design.active


def build_gamma(p, s, K):
    """Orthonormal spike directions ``Gamma`` (p x (K+1)) and constants
    ``(a0, a1, a2)``.

    Direction ``j < K`` is ``-a0`` on the first ``s`` coordinates except
    ``a1`` on its own block of length ``s/K``; direction ``K`` is ``a2`` on
    the last ``p - s`` coordinates.
    """
    if K < 3:
        raise ValueError("K must be >= 3 (K = 2 forces a1 = 0)")
    if s % K or not 0 < s < p:
        raise ValueError(f"need 0 < s < p and K | s, got p={p}, s={s}, K={K}")
    b = s // K
    # orthogonality: -2 a0 a1 + (K-2) a0^2 = 0; unit norm: (s-b) a0^2 + b a1^2 = 1
    ratio = (K - 2) / 2
    a0 = 1.0 / math.sqrt((s - b) + b * ratio**2)
    a1 = ratio * a0
    a2 = 1.0 / math.sqrt(p - s)
    G = np.zeros((p, K + 1))
    G[:s, :K] = -a0
    for j in range(K):
        G[j * b:(j + 1) * b, j] = a1
    G[s:, K] = a2
    return G, (a0, a1, a2)


def gen_covariates(Gamma, lam, n, rng):
    """``n`` rows of ``H Gamma^T + E`` with ``H ~ N(0, lam^2)`` and ``E ~ N(0, 1)``."""
    rng = np.random.default_rng(rng)
    p, L = Gamma.shape
    H = lam * rng.standard_normal((n, L))
    return H @ Gamma.T + rng.standard_normal((n, p))


def load_mask(pattern):
    """0/1 bitmap for a named pattern or a path to a text grid of 0s and 1s."""
    if pattern in PATTERN_RANKS:
        text = resources.files("tensorpls").joinpath(f"data/{pattern}.txt").read_text()
    else:
        path = Path(pattern)
        if not path.is_file():
            raise MaskError(f"unknown pattern {pattern!r}")
        text = path.read_text()
    rows = [r.strip() for r in text.splitlines() if r.strip()]
    if not rows or len({len(r) for r in rows}) != 1 or set("".join(rows)) - {"0", "1"}:
        raise MaskError(f"pattern {pattern!r} is not a rectangular 0/1 grid")
    return np.array([[c == "1" for c in r] for r in rows])


def build_pattern_coefficients(pattern, R, K, Gamma, d2, d3, theta1):
    """Odeco coefficient tensor drawing ``pattern`` in ``B[0]``.

    Returns ``(B, U1, U2, U3, theta, mask)``. The top ``R`` singular pairs of
    the mask give the second/third-mode loadings and relative weights; the
    first-mode loading ``r`` is the normalized sum of the spike directions in
    the ``r``-th of ``R`` contiguous groups of ``range(K)``.
    """
    mask = load_mask(pattern) if isinstance(pattern, str) else np.asarray(pattern, bool)
    if mask.shape != (d2, d3):
        raise MaskError(f"mask shape {mask.shape} does not match ({d2}, {d3})")
    rank = np.linalg.matrix_rank(mask.astype(float))
    if rank < R:
        raise MaskError(f"mask rank {rank} is smaller than R={R}")
    if not 1 <= R <= K:
        raise ValueError("need 1 <= R <= K")

    U, sv, Vt = np.linalg.svd(mask.astype(float))
    rows, cols = mask.any(axis=1), mask.any(axis=0)
    U2 = np.zeros((d2, R))
    U3 = np.zeros((d3, R))
    for r in range(R):
        u, sgn = sign_fix(U[:, r])
        U2[:, r] = np.where(rows, u, 0.0)
        U3[:, r] = np.where(cols, sgn * Vt[r], 0.0)
    theta = theta1 * sv[:R] / sv[0]

    U1 = np.zeros((Gamma.shape[0], R))
    for r, group in enumerate(np.array_split(np.arange(K), R)):
        v = Gamma[:, group].sum(axis=1)
        U1[:, r] = v / np.linalg.norm(v)

    B = np.einsum("ir,jr,kr->ijk", U1 * theta, U2, U3, optimize=True)
    return B, U1, U2, U3, theta, mask


def gen_response(X, B, sigma2, rng):
    """``B x_1 X + sigma2 * F`` with i.i.d. standard normal ``F``."""
    rng = np.random.default_rng(rng)
    mean = mode_multiply(B, X, 1)
    if sigma2 == 0:
        return mean
    return mean + sigma2 * rng.standard_normal(mean.shape)


def build_design(scenario):
    sc = scenario
    Gamma, a = build_gamma(sc.p, sc.s, sc.K)
    B, U1, U2, U3, theta, mask = build_pattern_coefficients(
        sc.pattern, sc.R, sc.K, Gamma, sc.d2, sc.d3, sc.theta1
    )
    return SimDesign(sc, Gamma, a, B, U1, U2, U3, theta, mask)


def draw(design, n, rng):
    """Fresh ``(X, Y)`` of ``n`` samples from a fixed design."""
    rng = np.random.default_rng(rng)
    sc = design.scenario
    X = gen_covariates(design.Gamma, sc.lam, n, rng)
    Y = gen_response(X, design.B, sc.sigma2, rng)
    return X, Y


def generate(scenario, rng=None):
    """Design plus one training sample of size ``scenario.n``.

    ``rng`` defaults to ``scenario.seed``.
    """
    design = build_design(scenario)
    X, Y = draw(design, scenario.n, scenario.seed if rng is None else rng)
    return GroundTruth(design, X, Y)
