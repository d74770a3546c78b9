"""File formats: binary tensors, headerless CSV matrices, model archives and
JSON run configurations.

Tensor files start with a short text manifest followed by the raw payload::

    TENSOR3
    dims: 120 64 64
    dtype: f64
    layout: row-major
    byteorder: little
    sha256: <hex digest of the payload>
    end
    <8 * d1 * d2 * d3 bytes>

Row-major means the last index varies fastest.
"""

import csv
import hashlib
import io as _io
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .decomp import HooiOptions
from .hopls import HoplsModel, predict
from .simulate import PATTERN_RANKS, SimScenario
from .sparse import DEFAULT_NU0, ShopsModel, ThresholdSpec

MAGIC = "TENSOR3"
MODEL_FORMAT = "tensorpls-model"
MODEL_VERSION = 1


class FormatError(ValueError):
    """A file does not match its declared format."""


class ConfigError(ValueError):
    """A run configuration failed validation."""


def _atomic_write(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def write_tensor(T, path):
    T = np.asarray(T, dtype="<f8")
    if T.ndim != 3:
        raise FormatError(f"expected a third-order tensor, got ndim={T.ndim}")
    payload = np.ascontiguousarray(T).tobytes(order="C")
    head = (
        f"{MAGIC}\ndims: {T.shape[0]} {T.shape[1]} {T.shape[2]}\ndtype: f64\n"
        f"layout: row-major\nbyteorder: little\n"
        f"sha256: {hashlib.sha256(payload).hexdigest()}\nend\n"
    )
    _atomic_write(path, head.encode("ascii") + payload)


def read_tensor(path):
    raw = Path(path).read_bytes()
    marker = b"\nend\n"
    cut = raw.find(marker)
    if not raw.startswith(MAGIC.encode()) or cut < 0:
        raise FormatError(f"{path}: not a {MAGIC} file")
    lines = raw[:cut].decode("ascii").splitlines()[1:]
    meta = {}
    for line in lines:
        key, sep, value = line.partition(":")
        if not sep:
            raise FormatError(f"{path}: malformed manifest line {line!r}")
        meta[key.strip()] = value.strip()
    expected = {"dtype": "f64", "layout": "row-major", "byteorder": "little"}
    for key, value in expected.items():
        if meta.get(key) != value:
            raise FormatError(f"{path}: unsupported {key} {meta.get(key)!r}")
    try:
        dims = tuple(int(x) for x in meta["dims"].split())
    except (KeyError, ValueError):
        raise FormatError(f"{path}: missing or invalid dims") from None
    if len(dims) != 3 or min(dims) < 1:
        raise FormatError(f"{path}: dims must be three positive integers, got {dims}")
    payload = raw[cut + len(marker):]
    if len(payload) != 8 * math.prod(dims):
        raise FormatError(
            f"{path}: payload has {len(payload)} bytes, dims {dims} need {8 * math.prod(dims)}"
        )
    if hashlib.sha256(payload).hexdigest() != meta.get("sha256"):
        raise FormatError(f"{path}: checksum mismatch")
    return np.frombuffer(payload, dtype="<f8").reshape(dims).astype(np.float64)


def write_matrix_csv(M, path):
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    text = "\n".join(",".join(repr(float(x)) for x in row) for row in M) + "\n"
    _atomic_write(path, text.encode("ascii"))


def read_matrix_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row:
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric entry") from None
            if len(rows[-1]) != len(rows[0]):
                raise FormatError(
                    f"{path}:{lineno}: {len(rows[-1])} columns, expected {len(rows[0])}"
                )
    if not rows:
        raise FormatError(f"{path}: empty matrix")
    return np.array(rows)


def write_active_sets(sets, path):
    """CSV with header ``mode,index``; indices are written 1-based."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mode", "index"])
    for m, idx in enumerate(sets, 1):
        for i in idx:
            w.writerow([m, int(i) + 1])
    _atomic_write(path, buf.getvalue().encode("ascii"))


def read_active_sets(path):
    out = [[], [], []]
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[int(row["mode"]) - 1].append(int(row["index"]) - 1)
    return tuple(np.array(sorted(s), dtype=np.intp) for s in out)


def write_records_csv(rows, path):
    """List of flat dicts to CSV; floats use their shortest exact repr."""
    if not rows:
        raise ValueError("no rows to write")
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    _atomic_write(path, buf.getvalue().encode("utf-8"))


def read_records_csv(path):
    def conv(v):
        for cast in (int, float):
            try:
                return cast(v)
            except ValueError:
                pass
        return v

    with open(path, newline="") as fh:
        return [{k: conv(v) for k, v in row.items()} for row in csv.DictReader(fh)]


# -- models ---------------------------------------------------------------

def _sets_to_arrays(prefix, sets, arrays):
    for k, triple in enumerate(sets):
        for m, idx in enumerate(triple):
            arrays[f"{prefix}_{k}_{m}"] = np.asarray(idx, dtype=np.int64)


def _arrays_to_sets(prefix, n, data):
    return [
        tuple(data[f"{prefix}_{k}_{m}"].astype(np.intp) for m in range(3)) for k in range(n)
    ]


@dataclass
class CoefficientModel:
    """A bare coefficient tensor (used for least-squares fits)."""

    B: np.ndarray

    def predict(self, Xnew):
        return predict(self, Xnew)


def serialize_model(model, path, extra=None):
    """Save a HOPLS, SHOPS or bare-coefficient model to an ``.npz`` archive."""
    arrays = {"B": model.B}
    meta = {"format": MODEL_FORMAT, "version": MODEL_VERSION}
    if not isinstance(model, CoefficientModel):
        arrays["W"] = model.W
        meta.update(K=model.K, requested_K=model.requested_K, truncated=model.truncated)
    if isinstance(model, CoefficientModel):
        meta["kind"] = "ols"
    elif isinstance(model, ShopsModel):
        meta.update(kind="shops", spec=asdict(model.spec), tau=list(model.tau),
                    seed=model.seed if isinstance(model.seed, (int, type(None))) else repr(model.seed),
                    flags=list(model.flags), n_sets=len(model.sets))
        _sets_to_arrays("set", model.sets, arrays)
        _sets_to_arrays("cum", model.cumulative, arrays)
        for k, Bk in enumerate(model.stage_B):
            arrays[f"stage_B_{k}"] = Bk
    elif isinstance(model, HoplsModel):
        meta["kind"] = "hopls"
        arrays.update(Q1=model.Q1, Q2=model.Q2, Q3=model.Q3, T_scores=model.T_scores,
                      P=model.P, G=model.G)
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    if extra:
        meta["extra"] = extra
    buf = _io.BytesIO()
    np.savez(buf, meta=np.array(json.dumps(meta)), **arrays)
    _atomic_write(path, buf.getvalue())


def load_model(path):
    with np.load(path, allow_pickle=False) as data:
        try:
            meta = json.loads(str(data["meta"]))
        except KeyError:
            raise FormatError(f"{path}: not a model archive") from None
        if meta.get("format") != MODEL_FORMAT:
            raise FormatError(f"{path}: not a model archive")
        if meta.get("version") != MODEL_VERSION:
            raise FormatError(f"{path}: unsupported model version {meta.get('version')!r}")
        d = {k: data[k] for k in data.files if k != "meta"}
    if meta["kind"] == "ols":
        return CoefficientModel(d["B"])
    if meta["kind"] == "hopls":
        return HoplsModel(meta["K"], d["W"], d["Q1"], d["Q2"], d["Q3"], d["T_scores"],
                          d["P"], d["G"], d["B"], [], meta["truncated"], meta["requested_K"])
    n = meta["n_sets"]
    return ShopsModel(
        meta["K"], d["B"], d["W"], _arrays_to_sets("set", n, d),
        _arrays_to_sets("cum", n, d), [d[f"stage_B_{k}"] for k in range(n)], [],
        meta["tau"], ThresholdSpec(**meta["spec"]), meta["seed"], meta["truncated"],
        meta["requested_K"], meta["flags"],
    )


def model_meta(path):
    with np.load(path, allow_pickle=False) as data:
        return json.loads(str(data["meta"]))


# -- configuration --------------------------------------------------------

@dataclass
class CvConfig:
    folds: int = 5
    nu_grid: list = field(default_factory=lambda: [round(0.1 * i, 1) for i in range(1, 10)])
    K_max: int = None


@dataclass
class RunConfig:
    """Everything a CLI run needs besides explicit file arguments."""

    scenarios: list = field(default_factory=lambda: [SimScenario()])
    X: str = None
    Y: str = None
    method: str = "shops"
    methods: list = field(default_factory=lambda: ["SHOPS", "HOPLS", "OLS"])
    K: int = None
    nu: float = 0.5
    nu0: float = DEFAULT_NU0
    robust: bool = True
    hooi: HooiOptions = field(default_factory=HooiOptions)
    cv: CvConfig = field(default_factory=CvConfig)
    use_cv: bool = False
    replicates: int = 10
    seed: int = None
    output: str = None

    @property
    def spec(self):
        return ThresholdSpec(nu=self.nu, nu0=self.nu0, robust=self.robust)


def _only_known(d, cls, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")
    return d


def _build(cls, d, where):
    try:
        return cls(**_only_known(d, cls, where))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_config(doc):
    """Validate a configuration mapping and return a :class:`RunConfig`."""
    d = dict(_only_known({} if doc is None else doc, RunConfig, "config"))
    scen = d.pop("scenarios", None)
    if scen is not None:
        if isinstance(scen, dict):
            scen = [scen]
        if not isinstance(scen, list) or not scen:
            raise ConfigError("scenarios must be a nonempty list")
        d["scenarios"] = [_build(SimScenario, s, f"scenarios[{i}]") for i, s in enumerate(scen)]
    if "hooi" in d:
        d["hooi"] = _build(HooiOptions, d["hooi"], "hooi")
    if "cv" in d:
        d["cv"] = _build(CvConfig, d["cv"], "cv")
    cfg = _build(RunConfig, d, "config")
    _validate(cfg)
    return cfg


def _validate(cfg):
    if cfg.method not in ("shops", "hopls", "ols"):
        raise ConfigError(f"method must be shops, hopls or ols, got {cfg.method!r}")
    bad = [m for m in cfg.methods if m not in ("SHOPS", "HOPLS", "OLS")]
    if bad or not cfg.methods:
        raise ConfigError(f"methods must be a nonempty subset of SHOPS, HOPLS, OLS; got {cfg.methods}")
    if cfg.K is not None and (not isinstance(cfg.K, int) or cfg.K < 1):
        raise ConfigError("K must be a positive integer")
    if not isinstance(cfg.replicates, int) or cfg.replicates < 1:
        raise ConfigError("replicates must be a positive integer")
    if cfg.seed is not None and (not isinstance(cfg.seed, int) or cfg.seed < 0):
        raise ConfigError("seed must be a nonnegative integer")
    if cfg.cv.folds < 2:
        raise ConfigError("cv.folds must be >= 2")
    if not cfg.cv.nu_grid or any(not 0 < v < 1 for v in cfg.cv.nu_grid):
        raise ConfigError("cv.nu_grid must be a nonempty list of values in (0, 1)")
    try:
        cfg.spec
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    for sc in cfg.scenarios:
        if not isinstance(sc.pattern, str) or (sc.pattern not in PATTERN_RANKS and not Path(sc.pattern).is_file()):
            raise ConfigError(f"unknown pattern {sc.pattern!r}")


def load_config(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(doc)
