"""Command-line interface.

Subcommands::

    simulate       draw a training and test sample from a scenario
    fit            fit SHOPS, HOPLS or least squares to (X, Y)
    cv             cross-validate (K, nu) for SHOPS
    benchmark      Monte-Carlo comparison over scenarios
    report         summarize benchmark records or score fitted models
    export-slices  write one slice of a fitted coefficient tensor as CSV

Matrices are headerless CSV, third-order tensors use the TENSOR3 binary
format of :mod:`tensorpls.io`. Every subcommand takes ``--seed``; without it
the seed comes from the config file, then the ``SHOPS_SEED`` environment
variable, then 0.

Failures print ``error[<category>]: <message>`` to stderr and exit with

    2  usage or config
    3  file or format
    4  runtime
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io as tio
from .hopls import hopls_fit, ols_fit
from .metrics import (
    METHODS, MetricsReport, ReplicateMetrics, _child, _replicate_seeds, benchmark,
    estimation_error, format_table, prediction_error, record_from_row, report_dict,
    scenario_label, selection_rates, support,
)
from .simulate import SimScenario, build_design, draw
from .sparse import ThresholdSpec, shops_fit
from .tuning import cross_validate, elbow_K

log = logging.getLogger("tensorpls")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_RUNTIME = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, category, message, code):
        super().__init__(message)
        self.category = category
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message, EXIT_USAGE)


def resolve_seed(cli_seed, cfg_seed=None):
    """``--seed``, else the config seed, else ``$SHOPS_SEED``, else 0."""
    if cli_seed is not None:
        return cli_seed
    if cfg_seed is not None:
        return cfg_seed
    env = os.environ.get("SHOPS_SEED")
    if env:
        try:
            seed = int(env)
        except ValueError:
            raise CliError("config", f"SHOPS_SEED must be an integer, got {env!r}", EXIT_USAGE) from None
        if seed < 0:
            raise CliError("config", "SHOPS_SEED must be nonnegative", EXIT_USAGE)
        return seed
    return 0


def _config(path):
    return tio.load_config(path) if path else tio.parse_config({})


# file names inside a simulate output directory
DATA_FILES = {
    "X": "X.csv", "Y": "Y.tensor", "B": "B.tensor", "active": "active.csv",
    "X_test": "X_test.csv", "Y_test": "Y_test.tensor", "meta": "scenario.json",
}


def _write_json(obj, path):
    tio._atomic_write(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode())


def cmd_simulate(args):
    cfg = _config(args.config)
    seed = resolve_seed(args.seed, cfg.seed)
    out = Path(args.out)
    many = len(cfg.scenarios) > 1
    for si, sc in enumerate(cfg.scenarios):
        design = build_design(sc)
        s_train, s_test, _ = _replicate_seeds(seed, si, args.replicate)
        X, Y = draw(design, sc.n, np.random.default_rng(s_train))
        Xt, Yt = draw(design, sc.n, np.random.default_rng(s_test))
        d = out / f"scenario_{si + 1}" if many else out
        tio.write_matrix_csv(X, d / DATA_FILES["X"])
        tio.write_tensor(Y, d / DATA_FILES["Y"])
        tio.write_tensor(design.B, d / DATA_FILES["B"])
        tio.write_active_sets(design.active, d / DATA_FILES["active"])
        tio.write_matrix_csv(Xt, d / DATA_FILES["X_test"])
        tio.write_tensor(Yt, d / DATA_FILES["Y_test"])
        _write_json({"scenario": sc.to_dict(), "scenario_index": si,
                     "replicate": args.replicate, "seed": seed}, d / DATA_FILES["meta"])
        print(f"wrote {scenario_label(sc)} to {d}")
    return EXIT_OK


def _load_pair(args, cfg):
    """``(X, Y, meta)`` from ``--data`` or ``--X``/``--Y`` (or the config)."""
    meta = {}
    if args.data:
        d = Path(args.data)
        X = tio.read_matrix_csv(d / DATA_FILES["X"])
        Y = tio.read_tensor(d / DATA_FILES["Y"])
        if (d / DATA_FILES["meta"]).is_file():
            meta = json.loads((d / DATA_FILES["meta"]).read_text())
    else:
        xp, yp = args.X or cfg.X, args.Y or cfg.Y
        if not xp or not yp:
            raise CliError("usage", "give --data DIR or both --X and --Y", EXIT_USAGE)
        X, Y = tio.read_matrix_csv(xp), tio.read_tensor(yp)
    if X.shape[0] != Y.shape[0]:
        raise CliError("format", f"X has {X.shape[0]} rows but Y has {Y.shape[0]} samples", EXIT_IO)
    return X, Y, meta


def method_seed(seed, scenario_index=0, replicate=0, method="SHOPS"):
    """Seed of a method's random draws, shared with :func:`benchmark` so that
    fitting simulated data reproduces the matching benchmark replicate."""
    s_method = _replicate_seeds(seed, scenario_index, replicate)[2]
    return _child(s_method, METHODS.index(method))


def cmd_fit(args):
    cfg = _config(args.config)
    X, Y, meta = _load_pair(args, cfg)
    seed = resolve_seed(args.seed, cfg.seed if cfg.seed is not None else meta.get("seed"))
    method = (args.method or cfg.method).upper()
    K = args.K or cfg.K or meta.get("scenario", {}).get("K") or elbow_K(X)
    nu = cfg.nu if args.nu is None else args.nu
    spec = ThresholdSpec(nu=nu, nu0=cfg.nu0, robust=cfg.robust)
    rng = np.random.default_rng(
        method_seed(seed, meta.get("scenario_index", 0), meta.get("replicate", 0), method)
    )
    if method == "SHOPS":
        model = shops_fit(Y, X, K, spec, cfg.hooi, rng)
        sets = model.active
    elif method == "HOPLS":
        model = hopls_fit(Y, X, K, cfg.hooi)
        sets = support(model.B)
    else:
        model = tio.CoefficientModel(ols_fit(Y, X))
        sets = support(model.B)
    out = Path(args.out)
    extra = {"method": method, "seed": seed, "K": int(K), "nu": nu}
    tio.serialize_model(model, out / "model.npz", extra=extra)
    tio.write_tensor(model.B, out / "B_hat.tensor")
    tio.write_active_sets(sets, out / "active_hat.csv")
    print(f"{method}: K={K}, active sizes {tuple(len(s) for s in sets)}, wrote {out}")
    return EXIT_OK


def cmd_cv(args):
    cfg = _config(args.config)
    X, Y, _ = _load_pair(args, cfg)
    seed = resolve_seed(args.seed, cfg.seed)
    K_max = args.K_max or cfg.cv.K_max or elbow_K(X)
    grid = args.nu_grid or cfg.cv.nu_grid
    res = cross_validate(Y, X, K_max, grid, args.folds or cfg.cv.folds, cfg.spec,
                         cfg.hooi, np.random.SeedSequence(seed), n_jobs=args.jobs)
    rows = [{"K": K, "nu": nu, "mean_error": m, "se": s} for K, nu, m, s in res.rows()]
    tio.write_records_csv(rows, args.out)
    for flag in res.flags:
        log.warning(flag)
    print(f"best K={res.best_K}, nu={res.best_nu}; table written to {args.out}")
    return EXIT_OK


def _emit_report(report_rows, records, out):
    out = Path(out)
    if records:
        tio.write_records_csv(records, out / "metrics.csv")
    tio.write_records_csv(report_rows, out / "summary.csv")
    table = format_table(report_rows)
    tio._atomic_write(out / "table.txt", (table + "\n").encode())
    print(table)


def cmd_benchmark(args):
    cfg = _config(args.config)
    seed = resolve_seed(args.seed, cfg.seed)
    cv = None
    if cfg.use_cv:
        cv = {"K_max": cfg.cv.K_max, "nu_grid": cfg.cv.nu_grid, "folds": cfg.cv.folds}
    report = benchmark(cfg.scenarios, cfg.methods, args.replicates or cfg.replicates, seed,
                       cfg.nu, cfg.K, cv, n_jobs=args.jobs)
    failed = [r for r in report.records if r.status == "failed"]
    for r in failed:
        log.warning("%s %s replicate %d failed: %s", r.scenario, r.method, r.replicate, r.message)
    _emit_report(report.aggregate(), report_dict(report), args.out or cfg.output or ".")
    return EXIT_OK


def _report_from_models(truth, models):
    d = Path(truth)
    meta = json.loads((d / DATA_FILES["meta"]).read_text())
    sc = SimScenario(**meta["scenario"])
    B = tio.read_tensor(d / DATA_FILES["B"])
    active = tio.read_active_sets(d / DATA_FILES["active"])
    Xt, Yt = tio.read_matrix_csv(d / DATA_FILES["X_test"]), tio.read_tensor(d / DATA_FILES["Y_test"])
    records = []
    for path in models:
        info = tio.model_meta(path)
        model = tio.load_model(path)
        method = info.get("extra", {}).get("method", info["kind"].upper())
        sets = model.active if info["kind"] == "shops" else support(model.B)
        t1, t23, f1, f23 = selection_rates(sets, active, B.shape)
        records.append(ReplicateMetrics(
            scenario_label(sc), method, meta.get("replicate", 0),
            estimation_error=estimation_error(model.B, B),
            prediction_error=prediction_error(model.B, Xt, Yt),
            TPR_1=t1, TPR_23=t23, FPR_1=f1, FPR_23=f23,
            K=info.get("K", 0) or 0, nu=info.get("extra", {}).get("nu", float("nan")),
        ))
    return MetricsReport(records, {scenario_label(sc): sc.to_dict()}, meta.get("seed"))


def cmd_report(args):
    if args.metrics:
        records = tio.read_records_csv(args.metrics)
        report = MetricsReport([record_from_row(r) for r in records])
        _emit_report(report.aggregate(), None, args.out)
    elif args.truth and args.model:
        report = _report_from_models(args.truth, args.model)
        _emit_report(report.aggregate(), report_dict(report), args.out)
    else:
        raise CliError("usage", "give --metrics FILE or --truth DIR with --model FILE...", EXIT_USAGE)
    return EXIT_OK


def cmd_export_slices(args):
    model = tio.load_model(args.model)
    B = model.B
    d = B.shape[args.mode - 1]
    if not 1 <= args.index <= d:
        raise CliError("usage", f"--index must be in 1..{d} for mode {args.mode}", EXIT_USAGE)
    sl = np.take(B, args.index - 1, axis=args.mode - 1)
    tio.write_matrix_csv(sl, args.out)
    print(f"wrote {sl.shape[0]}x{sl.shape[1]} slice to {args.out}")
    return EXIT_OK


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _pos_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nu_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated numbers") from None


def build_parser():
    p = _Parser(prog="tensorpls", description="Sparse higher-order PLS for tensor responses.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, config=True):
        sp.add_argument("--seed", type=_nonneg_int, default=None)
        if config:
            sp.add_argument("--config", help="JSON run configuration")

    def data_args(sp):
        sp.add_argument("--data", help="directory written by simulate")
        sp.add_argument("--X", help="headerless CSV of covariates (n x d1)")
        sp.add_argument("--Y", help="TENSOR3 file of responses (n x d2 x d3)")

    sp = sub.add_parser("simulate", help="draw simulated data")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--replicate", type=_nonneg_int, default=0)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="fit a model")
    common(sp)
    data_args(sp)
    sp.add_argument("--method", choices=["shops", "hopls", "ols"], type=str.lower)
    sp.add_argument("--K", type=_pos_int)
    sp.add_argument("--nu", type=float)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("cv", help="cross-validate K and nu")
    common(sp)
    data_args(sp)
    sp.add_argument("--K-max", dest="K_max", type=_pos_int)
    sp.add_argument("--nu-grid", dest="nu_grid", type=_nu_list)
    sp.add_argument("--folds", type=_pos_int)
    sp.add_argument("--jobs", type=_pos_int, default=1)
    sp.add_argument("--out", required=True, help="CSV path for the CV table")
    sp.set_defaults(func=cmd_cv)

    sp = sub.add_parser("benchmark", help="Monte-Carlo benchmark")
    common(sp)
    sp.add_argument("--replicates", type=_pos_int)
    sp.add_argument("--jobs", type=_pos_int, default=1)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_benchmark)

    sp = sub.add_parser("report", help="summarize metrics")
    common(sp, config=False)
    sp.add_argument("--metrics", help="per-replicate CSV written by benchmark")
    sp.add_argument("--truth", help="directory written by simulate")
    sp.add_argument("--model", nargs="+", help="model archives written by fit")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("export-slices", help="write a coefficient slice as CSV")
    common(sp, config=False)
    sp.add_argument("--model", required=True)
    sp.add_argument("--index", type=_pos_int, required=True, help="1-based slice index")
    sp.add_argument("--mode", type=int, choices=[1, 2, 3], default=1)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_export_slices)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except SystemExit as exc:  # --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except CliError as exc:
        err = exc
    except tio.ConfigError as exc:
        err = CliError("config", str(exc), EXIT_USAGE)
    except (tio.FormatError, KeyError) as exc:
        err = CliError("format", str(exc), EXIT_IO)
    except OSError as exc:
        err = CliError("io", str(exc), EXIT_IO)
    except Exception as exc:
        err = CliError("runtime", f"{type(exc).__name__}: {exc}", EXIT_RUNTIME)
    print(f"error[{err.category}]: {err}", file=sys.stderr)
    return err.code


if __name__ == "__main__":
    sys.exit(main())
