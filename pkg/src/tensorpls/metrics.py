"""Evaluation criteria and the Monte-Carlo benchmark over simulated scenarios."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .hopls import hopls_fit, ols_fit, predict
from .simulate import build_design, draw
from .sparse import ThresholdSpec, shops_fit
from .tuning import DEFAULT_NU_GRID, cross_validate, elbow_K

log = logging.getLogger(__name__)

METHODS = ("SHOPS", "HOPLS", "OLS")
METRICS = ("estimation_error", "prediction_error", "TPR_1", "TPR_23", "FPR_1", "FPR_23")


def estimation_error(Bhat, B):
    return float(np.linalg.norm(np.asarray(Bhat) - np.asarray(B)))


def prediction_error(Bhat, Xnew, Ynew):
    """``||Ynew - Bhat x_1 Xnew||_F / sqrt(n)`` with ``n`` the rows of ``Xnew``."""
    R = np.asarray(Ynew) - predict(Bhat, Xnew)
    return float(np.linalg.norm(R) / math.sqrt(np.shape(Xnew)[0]))


def tpr_fpr(Ahat, Astar, d):
    """True and false positive rates of an estimated index set."""
    Astar = np.unique(np.asarray(Astar, dtype=np.intp))
    Ahat = np.unique(np.asarray(Ahat, dtype=np.intp))
    if Astar.size == 0 or Astar.size >= d:
        raise ValueError("true set must be nonempty and a proper subset of range(d)")
    hits = np.intersect1d(Ahat, Astar).size
    return hits / Astar.size, (Ahat.size - hits) / (d - Astar.size)


def support(B):
    """Per-mode indices along which ``B`` has a nonzero entry."""
    nz = np.asarray(B) != 0
    return (
        np.flatnonzero(nz.any(axis=(1, 2))),
        np.flatnonzero(nz.any(axis=(0, 2))),
        np.flatnonzero(nz.any(axis=(0, 1))),
    )


def selection_rates(Ahat, Astar, dims):
    """``(TPR_1, TPR_23, FPR_1, FPR_23)``; the mode-2/3 rates are averaged."""
    rates = [tpr_fpr(a, s, d) for a, s, d in zip(Ahat, Astar, dims)]
    tpr = [r[0] for r in rates]
    fpr = [r[1] for r in rates]
    return tpr[0], (tpr[1] + tpr[2]) / 2, fpr[0], (fpr[1] + fpr[2]) / 2


@dataclass
class ReplicateMetrics:
    scenario: str
    method: str
    replicate: int
    status: str = "ok"
    estimation_error: float = math.nan
    prediction_error: float = math.nan
    TPR_1: float = math.nan
    TPR_23: float = math.nan
    FPR_1: float = math.nan
    FPR_23: float = math.nan
    K: int = 0
    nu: float = math.nan
    message: str = ""


@dataclass
class MetricsReport:
    records: list = field(default_factory=list)
    scenarios: dict = field(default_factory=dict)
    seed: object = None

    def aggregate(self):
        """One row per (scenario, method): counts plus mean and sd of each metric.

        The sd uses ``ddof=1`` and is 0 for a single replicate.
        """
        groups = {}
        for r in self.records:
            groups.setdefault((r.scenario, r.method), []).append(r)
        rows = []
        for (scen, method), recs in groups.items():
            ok = [r for r in recs if r.status == "ok"]
            row = {
                "scenario": scen,
                "method": method,
                "replicates": len(ok),
                "failures": sum(r.status == "failed" for r in recs),
                "not_applicable": sum(r.status == "n/a" for r in recs),
            }
            for m in METRICS:
                vals = np.array([getattr(r, m) for r in ok], dtype=np.float64)
                row[f"{m}_mean"] = float(math.fsum(vals) / vals.size) if vals.size else math.nan
                row[f"{m}_sd"] = float(np.std(vals, ddof=1)) if vals.size > 1 else (0.0 if vals.size else math.nan)
            rows.append(row)
        return rows

    def values(self, scenario, method, metric):
        return np.array(
            [getattr(r, metric) for r in self.records
             if r.scenario == scenario and r.method == method and r.status == "ok"]
        )


def scenario_label(sc):
    return f"n={sc.n},R={sc.R},s={sc.s}"


def _replicate_seeds(seed, scenario_index, replicate):
    ss = np.random.SeedSequence(seed, spawn_key=(scenario_index, replicate))
    return [_child(ss, i) for i in range(3)]  # train data, test data, methods


def _child(ss, i):
    # keyed child: stable regardless of how many siblings were spawned before
    return np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (i,))


def _fit_method(method, design, X, Y, Xt, Yt, K, nu, method_rng, cv):
    sc = design.scenario
    rec = {"K": K}
    if method == "OLS":
        Bhat = ols_fit(Y, X)
        Ahat = support(Bhat)
    elif method == "HOPLS":
        Bhat = hopls_fit(Y, X, K).B
        Ahat = support(Bhat)
    elif method == "SHOPS":
        if cv:
            K_max = cv.get("K_max") or elbow_K(X)
            res = cross_validate(
                Y, X, K_max, cv.get("nu_grid", DEFAULT_NU_GRID), cv.get("folds", 5),
                rng=np.random.default_rng(_child(method_rng, 1)),
            )
            K, nu = res.best_K, res.best_nu
            rec.update(K=K)
        model = shops_fit(Y, X, K, ThresholdSpec(nu=nu), rng=np.random.default_rng(method_rng))
        Bhat = model.B
        Ahat = model.active
        rec["nu"] = nu
    else:
        raise ValueError(f"unknown method {method!r}")
    dims = (sc.p, sc.d2, sc.d3)
    t1, t23, f1, f23 = selection_rates(Ahat, design.active, dims)
    rec.update(
        estimation_error=estimation_error(Bhat, design.B),
        prediction_error=prediction_error(Bhat, Xt, Yt),
        TPR_1=t1, TPR_23=t23, FPR_1=f1, FPR_23=f23,
    )
    return rec


def benchmark(scenarios, methods=METHODS, replicates=30, seed=0, nu=0.5, K=None,
              cv=None, n_jobs=1):
    """Fit each method on fresh training data per replicate and score it on an
    independent test set of the same size.

    SHOPS and HOPLS use ``K`` components (default: the scenario's ``K``) and
    SHOPS the hard-threshold fraction ``nu``,
    unless ``cv`` (a dict with optional ``K_max``, ``nu_grid``, ``folds``)
    asks for cross-validated tuning. OLS is recorded as not applicable when
    ``n <= p``. A failing fit is recorded rather than raised.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    designs = [build_design(sc) for sc in scenarios]

    def one(si, rep):
        design = designs[si]
        sc = design.scenario
        label = scenario_label(sc)
        s_train, s_test, s_method = _replicate_seeds(seed, si, rep)
        X, Y = draw(design, sc.n, np.random.default_rng(s_train))
        Xt, Yt = draw(design, sc.n, np.random.default_rng(s_test))
        out = []
        for method in methods:
            if method == "OLS" and sc.n <= sc.p:
                out.append(ReplicateMetrics(label, method, rep, status="n/a",
                                            message="n <= p"))
                continue
            try:
                rec = _fit_method(method, design, X, Y, Xt, Yt, K or sc.K, nu,
                                  _child(s_method, METHODS.index(method)), cv)
                out.append(ReplicateMetrics(label, method, rep, **rec))
            except Exception as exc:  # recorded, not fatal
                log.warning("%s failed on %s replicate %d: %s", method, label, rep, exc)
                out.append(ReplicateMetrics(label, method, rep, status="failed",
                                            message=f"{type(exc).__name__}: {exc}"))
        return out

    jobs = [(si, rep) for si in range(len(scenarios)) for rep in range(replicates)]
    if n_jobs == 1:
        chunks = [one(*j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            chunks = list(pool.map(lambda j: one(*j), jobs))
    records = [r for chunk in chunks for r in chunk]
    return MetricsReport(
        records, {scenario_label(sc): sc.to_dict() for sc in scenarios}, seed
    )


def format_table(rows):
    """Plain-text table with one line per (scenario, method), mean (sd)."""
    head = ["Scenario", "Method", "Estimation error", "Prediction error",
            "TPR_1", "TPR_23", "FPR_1", "FPR_23"]
    lines = []
    for row in rows:
        cells = [row["scenario"], row["method"]]
        if not row["replicates"]:
            cells += ["-"] * 6
        else:
            for m in METRICS:
                cells.append(f"{row[m + '_mean']:.3f} ({row[m + '_sd']:.3f})")
        lines.append(cells)
    widths = [max(len(h), *(len(c[i]) for c in lines)) if lines else len(h)
              for i, h in enumerate(head)]
    fmt = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths))
    return "\n".join([fmt(head), fmt(["-" * w for w in widths])] + [fmt(c) for c in lines])


def report_dict(report):
    return [asdict(r) for r in report.records]


def record_from_row(row):
    """Inverse of one :func:`report_dict` row (after a CSV round trip)."""
    names = {f.name for f in fields(ReplicateMetrics)}
    d = {k: v for k, v in row.items() if k in names}
    for k in ("scenario", "method", "status", "message"):
        d[k] = "" if d.get(k) is None else str(d[k])
    for k in METRICS + ("nu",):
        d[k] = float(d[k]) if d.get(k) not in (None, "") else math.nan
    return ReplicateMetrics(**d)
