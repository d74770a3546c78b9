"""Acceptance criteria 1-10.

Each test records one PASS/FAIL line (shown in the terminal summary) before
asserting. The Monte-Carlo benchmarks are shared between criteria through
module-scoped fixtures.
"""

import json
import warnings

import numpy as np
import pytest

from helpers import planted_sparse
from tensorpls import cli
from tensorpls import io as tio
from tensorpls.decomp import hooi_rank1, sign_fix
from tensorpls.hopls import hopls_fit
from tensorpls.metrics import benchmark
from tensorpls.simulate import (
    PATTERN_RANKS, SimScenario, build_design, build_gamma, gen_covariates, load_mask,
)
from tensorpls.sparse import ThresholdSpec, shops_fit
from tensorpls.tensor import (
    fold, frobenius_norm, kron, mode_multiply, other_modes, outer3, unfold,
)

SEED = 2024
REPS = 10

pytestmark = pytest.mark.slow


def _run(scenarios, methods, reps=REPS, seed=SEED, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return benchmark(scenarios, methods, reps, seed, **kw)


def _row(report, method):
    return next(r for r in report.aggregate() if r["method"] == method)


@pytest.fixture(scope="module")
def n120():
    return _run([SimScenario(n=120)], ["SHOPS", "HOPLS"])


@pytest.fixture(scope="module")
def n360():
    return _run([SimScenario(n=360)], ["HOPLS"])


def test_criterion_1_shops_row(n120, criterion):
    r = _row(n120, "SHOPS")
    ok = (r["replicates"] >= 10 and 0.24 <= r["estimation_error_mean"] <= 0.55
          and r["TPR_1_mean"] >= 0.99 and r["FPR_1_mean"] <= 0.10 and r["TPR_23_mean"] >= 0.95)
    criterion(1, ok, (
        f"SHOPS n=120 ({r['replicates']} reps): error {r['estimation_error_mean']:.3f} "
        f"(sd {r['estimation_error_sd']:.3f}), TPR_1 {r['TPR_1_mean']:.3f}, "
        f"FPR_1 {r['FPR_1_mean']:.3f}, TPR_23 {r['TPR_23_mean']:.3f}"
    ))
    assert ok


def test_criterion_2_hopls_row(n360, criterion):
    r = _row(n360, "HOPLS")
    ok = r["replicates"] >= 10 and 0.25 <= r["estimation_error_mean"] <= 0.60
    criterion(2, ok, f"HOPLS n=360 ({r['replicates']} reps): error "
                     f"{r['estimation_error_mean']:.3f} (sd {r['estimation_error_sd']:.3f})")
    assert ok


def test_criterion_3_orderings(n120, criterion):
    s60 = _run([SimScenario(n=120, s=60)], ["SHOPS", "HOPLS"])
    bat = _run([SimScenario.for_pattern("bat", n=360)], ["SHOPS", "HOPLS"])
    parts, ok = [], True
    for name, rep in (("n=120,s=30", n120), ("n=120,s=60", s60), ("n=360,R=14", bat)):
        a = _row(rep, "SHOPS")["estimation_error_mean"]
        b = _row(rep, "HOPLS")["estimation_error_mean"]
        label = rep.records[0].scenario
        wins = np.mean(rep.values(label, "SHOPS", "estimation_error")
                       <= rep.values(label, "HOPLS", "estimation_error"))
        ok &= a < b and (name.endswith("R=14") or wins >= 0.8)
        parts.append(f"{name}: {a:.3f} < {b:.3f} (SHOPS wins {wins:.0%})")
    criterion(3, ok, "SHOPS vs HOPLS mean error; " + "; ".join(parts))
    assert ok


def test_criterion_4_rates(n120, criterion):
    big = _run([SimScenario(n=480)], ["SHOPS"])
    huge = _run([SimScenario(n=960)], ["HOPLS"])
    label120 = n120.records[0].scenario
    s_small = np.median(n120.values(label120, "SHOPS", "estimation_error"))
    s_big = np.median(big.values(big.records[0].scenario, "SHOPS", "estimation_error"))
    h_small = np.median(n120.values(label120, "HOPLS", "estimation_error"))
    h_big = np.median(huge.values(huge.records[0].scenario, "HOPLS", "estimation_error"))
    ratio, growth = s_big / s_small, h_small / h_big
    ok = 0.3 <= ratio <= 0.8 and growth >= 2
    criterion(4, ok, f"SHOPS median error n=480/n=120 = {ratio:.3f}; "
                     f"HOPLS median error n=120/n=960 = {growth:.2f}")
    assert ok


def test_criterion_5_exact_recovery(criterion):
    good, worst = 0, 0.0
    for seed in range(20):
        X, Y, B, supports = planted_sparse(seed, dims=(60, 32, 32), n=200,
                                           supports=(10, 8, 8), theta=(6.0, 2.0))
        m = shops_fit(Y, X, 2, ThresholdSpec(nu=0.5), rng=seed)
        err = np.linalg.norm(m.B - B) / np.linalg.norm(B)
        worst = max(worst, err)
        good += all(np.array_equal(a, b) for a, b in zip(m.active, supports)) and err <= 1e-3
    ok = good == 20
    criterion(5, ok, f"noiseless planted model: {good}/20 seeds exact, worst relative error {worst:.1e}")
    assert ok


def test_criterion_6_reduction(criterion):
    same = 0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((50, 15))
        Y = np.einsum("ni,ijk->njk", X, rng.standard_normal((15, 6, 5))) + rng.standard_normal((50, 6, 5))
        K = 1 + seed % 3
        m = shops_fit(Y, X, K, ThresholdSpec(nu=1e-12, nu0=0.0), rng=seed)
        full = all(len(s) == d for s, d in zip(m.cumulative[0], (15, 6, 5)))
        same += full and m.B.tobytes() == hopls_fit(Y, X, K).B.tobytes()
    ok = same == 5
    criterion(6, ok, f"tau=0, nu->0: SHOPS equals HOPLS bit-for-bit on {same}/5 datasets")
    assert ok


def _orth(rng, d, k):
    return np.linalg.qr(rng.standard_normal((d, k)))[0]


def test_criterion_7_hooi(criterion):
    rng = np.random.default_rng(SEED)
    exact = planted = 0
    for _ in range(100):
        dims = tuple(rng.integers(2, 9, 3))
        u = [_orth(rng, d, 1)[:, 0] for d in dims]
        g = rng.uniform(0.5, 5)
        res = hooi_rank1(g * outer3(*u))
        ok1 = all(np.linalg.norm(q - sign_fix(v)[0]) <= 1e-8 for q, v in zip(res.loadings, u))
        exact += ok1 and abs(abs(res.core) - g) <= 1e-8
        U = [_orth(rng, d, 2) for d in dims]
        T = 3 * outer3(*(Q[:, 0] for Q in U)) + outer3(*(Q[:, 1] for Q in U))
        res = hooi_rank1(T)
        planted += all(abs(q @ Q[:, 0]) >= 1 - 1e-6 for q, Q in zip(res.loadings, U))
    ok = exact == 100 and planted == 100
    criterion(7, ok, f"HOOI: rank-1 recovered {exact}/100, odeco 3:1 leading component {planted}/100")
    assert ok


def test_criterion_8_tensor_algebra(criterion):
    rng = np.random.default_rng(SEED)
    failures = []
    for case in range(1000):
        dims = (int(rng.integers(1, 8)), int(rng.integers(1, 7)), int(rng.integers(1, 6)))
        T = rng.standard_normal(dims)
        nT = max(1.0, frobenius_norm(T))
        m = int(rng.integers(1, 4))
        checks = {}
        checks["round trip"] = np.array_equal(fold(unfold(T, m), m, dims), T)
        A = rng.standard_normal((3, dims[m - 1]))
        C = rng.standard_normal((2, 3))
        lhs = mode_multiply(mode_multiply(T, A, m), C, m)
        rhs = mode_multiply(T, C @ A, m)
        checks["associativity"] = frobenius_norm(lhs - rhs) <= 1e-12 * max(1.0, frobenius_norm(rhs))
        a, b = other_modes(m)
        Pa = rng.standard_normal((2, dims[a - 1]))
        Pb = rng.standard_normal((4, dims[b - 1]))
        lhs = mode_multiply(mode_multiply(T, Pa, a), Pb, b)
        rhs = mode_multiply(mode_multiply(T, Pb, b), Pa, a)
        checks["commutation"] = frobenius_norm(lhs - rhs) <= 1e-12 * max(1.0, frobenius_norm(rhs))
        q = [rng.standard_normal(d) for d in dims]
        O = outer3(*q)
        M = unfold(O, m)
        kr = kron(q[a - 1], q[b - 1])
        checks["kronecker"] = np.abs(M - np.outer(kr, q[m - 1])).max() <= 1e-12 * max(1.0, np.abs(M).max())
        checks["norms"] = all(abs(frobenius_norm(T) - np.linalg.norm(unfold(T, k))) <= 1e-12 * nT
                              for k in (1, 2, 3))
        bad = [k for k, v in checks.items() if not v]
        if bad:
            failures.append((case, dims, m, bad))
    ok = not failures
    criterion(8, ok, f"tensor algebra: {1000 - len(failures)}/1000 random cases pass all five identities")
    assert ok, failures[:5]


def test_criterion_9_generator_audit(criterion):
    gram_ok = True
    for K in (3, 4, 5, 6, 10, 15):
        for b in (1, 2, 4):
            for extra in (1, 30, 210):
                G, _ = build_gamma(K * b + extra, K * b, K)
                gram_ok &= np.abs(G.T @ G - np.eye(K + 1)).max() <= 1e-10
    ranks = tuple(int(np.linalg.matrix_rank(load_mask(p).astype(float)))
                  for p in ("square", "cross", "circle", "bat"))
    odeco_ok = True
    for p in PATTERN_RANKS:
        d = build_design(SimScenario.for_pattern(p))
        for U in (d.U1, d.U2, d.U3):
            Gm = U.T @ U
            odeco_ok &= np.abs(Gm - np.diag(np.diag(Gm))).max() <= 1e-10
        odeco_ok &= abs(np.sum(d.B**2) - np.sum(d.theta**2)) <= 1e-8 * np.sum(d.theta**2)
        odeco_ok &= not np.any(d.U1[d.scenario.s:])
    G, _ = build_gamma(240, 30, 3)
    n = 20000
    X = gen_covariates(G, 10.0, n, np.random.default_rng(SEED))
    Sigma = 100.0 * G @ G.T + np.eye(240)
    se = np.sqrt((np.outer(np.diag(Sigma), np.diag(Sigma)) + Sigma**2) / n)
    z = np.abs(X.T @ X / n - Sigma) / se
    cov_ok = z.max() <= 5
    ok = gram_ok and ranks == (1, 2, 9, 14) and odeco_ok and cov_ok
    criterion(9, ok, f"generator: Gamma orthonormal {gram_ok}, mask ranks {ranks}, odeco {odeco_ok}, "
                     f"Cov(X) max |z| {z.max():.2f} at n=20000")
    assert ok


def test_criterion_10_cli_end_to_end(tmp_path, n120, criterion):
    cfg = tmp_path / "table1.json"
    cfg.write_text(json.dumps({
        "scenarios": [{"n": 120, "p": 240, "s": 30, "K": 3, "R": 1, "sigma2": 2.0}],
        "methods": ["SHOPS", "HOPLS"], "K": 3, "nu": 0.5, "replicates": REPS, "seed": SEED,
    }))
    outputs = []
    for run in ("a", "b"):
        d = tmp_path / run
        codes = [
            cli.main(["simulate", "--config", str(cfg), "--out", str(d / "sim")]),
            cli.main(["fit", "--config", str(cfg), "--data", str(d / "sim"), "--method", "shops",
                      "--out", str(d / "fit")]),
            cli.main(["benchmark", "--config", str(cfg), "--out", str(d / "bench")]),
            cli.main(["report", "--metrics", str(d / "bench" / "metrics.csv"), "--out", str(d / "rep")]),
        ]
        files = ("sim/Y.tensor", "fit/B_hat.tensor", "bench/metrics.csv", "rep/summary.csv")
        outputs.append((codes, {f: (d / f).read_bytes() for f in files}))
    (codes_a, files_a), (codes_b, files_b) = outputs
    identical = files_a == files_b
    rows = tio.read_records_csv(tmp_path / "a" / "rep" / "summary.csv")
    cli_row = next(r for r in rows if r["method"] == "SHOPS")
    ref = _row(n120, "SHOPS")
    keys = [k for k in ref if k.endswith(("_mean", "_sd"))]
    reproduces = all(cli_row[k] == ref[k] for k in keys)
    ok = codes_a == codes_b == [0, 0, 0, 0] and identical and reproduces
    criterion(10, ok, f"CLI exit codes {codes_a}, two runs bit-identical {identical}, "
                      f"SHOPS summary equals criterion 1 {reproduces} "
                      f"(error {cli_row['estimation_error_mean']:.3f})")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
