"""Persistent formats: dataset JSON (schema v1), model bundles and flat CSV tables.

A dataset document looks like::

    {"schema_version": 1, "mode": "multi-source",
     "systems": [{"name": "source1", "X": [[...], ...], "y": [...]}, ...,
                 {"name": "target", ...}],
     "bounds": {"lower": [...], "upper": [...]}, "nested": null,
     "provenance": {...}}

Inputs are stored on the unit box; ``bounds`` (optional) records the box
they were rescaled from. The last system is always the target (or the
highest fidelity level).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .core.kernels import InputError, KernelSpec
from .data import MultiFidelityData, MultiSourceData, Standardizer
from .params import MULTI_FIDELITY, MULTI_SOURCE, HyperParams

SCHEMA_VERSION = 1
BUNDLE_VERSION = 1
MODES = (MULTI_SOURCE, MULTI_FIDELITY)


class SchemaError(InputError):
    """A dataset, bundle or table that does not match its schema."""


# -- dataset documents ---------------------------------------------------------

@dataclass
class DatasetFile:
    """In-memory form of a schema-v1 dataset document."""

    mode: str
    systems: list[tuple[str, np.ndarray, np.ndarray]]
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None
    nested: bool | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise SchemaError(f"field 'mode': expected one of {MODES}, got {self.mode!r}")
        if len(self.systems) < (2 if self.mode == MULTI_SOURCE else 1):
            raise SchemaError("field 'systems': multi-source data needs at least one source and a target")
        dims = {np.asarray(X).shape[1] for _, X, _ in self.systems}
        if len(dims) != 1:
            raise SchemaError(f"field 'systems': inconsistent input dimensions {sorted(dims)}")
        if (self.lower is None) != (self.upper is None):
            raise SchemaError("field 'bounds': both 'lower' and 'upper' are required")
        if self.lower is not None:
            lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
            if lo.shape != (self.dim,) or hi.shape != (self.dim,) or np.any(hi <= lo):
                raise SchemaError(f"field 'bounds': need {self.dim} pairs with lower < upper")

    @property
    def dim(self) -> int:
        return int(np.asarray(self.systems[0][1]).shape[1])

    def to_data(self):
        """The :mod:`lolgp.data` container (validates SM1 and nesting)."""
        pairs = [(X, y) for _, X, y in self.systems]
        if self.mode == MULTI_SOURCE:
            return MultiSourceData(tuple(pairs[:-1]), pairs[-1])
        return MultiFidelityData(tuple(pairs), self.nested)

    @classmethod
    def from_data(cls, data, names=None, lower=None, upper=None, provenance=None) -> "DatasetFile":
        if isinstance(data, MultiSourceData):
            mode, pairs = MULTI_SOURCE, [*data.sources, data.target]
            default = [f"source{l + 1}" for l in range(data.n_sources)] + ["target"]
            nested = None
        elif isinstance(data, MultiFidelityData):
            mode, pairs = MULTI_FIDELITY, list(data.levels)
            default = [f"level{l + 1}" for l in range(data.n_levels)]
            nested = bool(data.nested)
        else:
            raise TypeError(f"unsupported data type {type(data).__name__}")
        names = list(names) if names is not None else default
        systems = [(n, np.asarray(X, float), np.asarray(y, float)) for n, (X, y) in zip(names, pairs)]
        return cls(mode, systems, None if lower is None else tuple(map(float, lower)),
                   None if upper is None else tuple(map(float, upper)), nested, dict(provenance or {}))

    def to_unit(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.lower is None:
            return X
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return (X - lo) / (hi - lo)

    def from_unit(self, U) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        if self.lower is None:
            return U
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return lo + U * (hi - lo)

    def to_dict(self) -> dict:
        doc = {"schema_version": SCHEMA_VERSION, "mode": self.mode,
               "systems": [{"name": n, "X": np.asarray(X).tolist(), "y": np.asarray(y).tolist()}
                           for n, X, y in self.systems],
               "nested": self.nested, "provenance": self.provenance}
        if self.lower is not None:
            doc["bounds"] = {"lower": list(self.lower), "upper": list(self.upper)}
        return doc

    @classmethod
    def from_dict(cls, doc) -> "DatasetFile":
        if not isinstance(doc, dict):
            raise SchemaError("dataset document must be a JSON object")
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaError(f"field 'schema_version': expected {SCHEMA_VERSION}, got {version!r}")
        mode = doc.get("mode")
        if mode not in MODES:
            raise SchemaError(f"field 'mode': expected one of {MODES}, got {mode!r}")
        raw = doc.get("systems")
        if not isinstance(raw, list) or not raw:
            raise SchemaError("field 'systems': expected a non-empty list")
        systems = []
        for k, s in enumerate(raw):
            where = f"systems[{k}]"
            if not isinstance(s, dict):
                raise SchemaError(f"field '{where}': expected an object")
            for key in ("X", "y"):
                if key not in s:
                    raise SchemaError(f"field '{where}.{key}' is missing")
            X = _matrix(s["X"], f"{where}.X")
            y = _vector(s["y"], f"{where}.y")
            if len(y) != len(X):
                raise SchemaError(f"field '{where}.y': {len(y)} outputs for {len(X)} input rows")
            systems.append((str(s.get("name", f"system{k + 1}")), X, y))
        bounds = doc.get("bounds")
        lower = upper = None
        if bounds is not None:
            if not isinstance(bounds, dict) or "lower" not in bounds or "upper" not in bounds:
                raise SchemaError("field 'bounds': expected {'lower': [...], 'upper': [...]}")
            lower = tuple(_vector(bounds["lower"], "bounds.lower").tolist())
            upper = tuple(_vector(bounds["upper"], "bounds.upper").tolist())
        nested = doc.get("nested")
        if nested is not None and not isinstance(nested, bool):
            raise SchemaError(f"field 'nested': expected true, false or null, got {nested!r}")
        prov = doc.get("provenance", {})
        if not isinstance(prov, dict):
            raise SchemaError("field 'provenance': expected an object")
        return cls(mode, systems, lower, upper, nested, prov)


def _matrix(v, where: str) -> np.ndarray:
    if not isinstance(v, list):
        raise SchemaError(f"field '{where}': expected a list of rows")
    if not v:
        raise SchemaError(f"field '{where}': no rows")
    widths = set()
    for i, row in enumerate(v):
        if not isinstance(row, list) or not all(_is_number(x) for x in row):
            raise SchemaError(f"field '{where}[{i}]': expected a list of numbers")
        widths.add(len(row))
    if len(widths) != 1 or 0 in widths:
        raise SchemaError(f"field '{where}': rows must be non-empty and rectangular")
    X = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(X)):
        raise SchemaError(f"field '{where}': non-finite input")
    return X


def _vector(v, where: str) -> np.ndarray:
    if not isinstance(v, list) or not all(_is_number(x) for x in v):
        raise SchemaError(f"field '{where}': expected a list of numbers")
    y = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(y)):
        raise SchemaError(f"field '{where}': non-finite value")
    return y


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def dump_json(obj, path) -> None:
    """Deterministic JSON (sorted keys, shortest round-trip floats)."""
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=1, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def load_json(path, what: str = "document"):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"{what} not found: {path}") from None
    except json.JSONDecodeError as e:
        raise SchemaError(f"{what} {path} is not valid JSON (line {e.lineno}, column {e.colno}): {e.msg}") from None


def save_dataset(ds: DatasetFile, path) -> None:
    dump_json(ds.to_dict(), path)


def load_dataset(path) -> DatasetFile:
    return DatasetFile.from_dict(load_json(path, "dataset"))


# -- flat tables ---------------------------------------------------------------

def read_table(path) -> tuple[list[str], np.ndarray]:
    """Numeric CSV with a header row; returns ``(columns, values)``."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except FileNotFoundError:
        raise InputError(f"table not found: {path}") from None
    if not rows:
        raise SchemaError(f"{path}: empty file (a header row is required)")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    vals = np.empty((len(body), len(header)))
    for i, r in enumerate(body):
        if len(r) != len(header):
            raise SchemaError(f"{path}, line {i + 2}: {len(r)} fields, header has {len(header)}")
        try:
            vals[i] = [float(x) for x in r]
        except ValueError:
            raise SchemaError(f"{path}, line {i + 2}: non-numeric field") from None
    return header, vals


def read_inputs(path, dim: int | None = None) -> np.ndarray:
    """Test inputs from the ``x1..xd`` columns of a CSV (other columns ignored)."""
    header, vals = read_table(path)
    cols = [j for j, h in enumerate(header) if h.startswith("x") and h[1:].isdigit()]
    if not cols:
        raise SchemaError(f"{path}: no x1..xd columns in header {header}")
    cols.sort(key=lambda j: int(header[j][1:]))
    if [int(header[j][1:]) for j in cols] != list(range(1, len(cols) + 1)):
        raise SchemaError(f"{path}: input columns must be x1..xd without gaps")
    if dim is not None and len(cols) != dim:
        raise SchemaError(f"{path}: {len(cols)} input columns but the model expects {dim}")
    return vals[:, cols].reshape(len(vals), len(cols))


def read_column(path, name: str) -> np.ndarray:
    header, vals = read_table(path)
    if name not in header:
        raise SchemaError(f"{path}: missing column {name!r}")
    return vals[:, header.index(name)]


def _r(v) -> str:
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def write_table(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_r(v) for v in row])


def write_predictions(path, X, pred) -> None:
    """Columns ``x1..xd, mean, sd, q2.5, q97.5``; one row per test point."""
    X = np.asarray(X, dtype=float)
    X = X.reshape(len(X), -1) if X.ndim != 2 else X
    cols = [f"x{j + 1}" for j in range(X.shape[1])] + ["mean", "sd", "q2.5", "q97.5"]
    if len(X) == 0:
        write_table(path, cols, [])
        return
    lo, hi = pred.interval(0.95)
    table = np.column_stack([X, pred.mean, pred.sd, lo, hi])
    write_table(path, cols, table)


# -- ingestion -----------------------------------------------------------------

def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _read_runs(path) -> np.ndarray:
    """All-numeric CSV; a first row with any non-numeric field is a header."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except FileNotFoundError:
        raise InputError(f"CSV not found: {path}") from None
    if rows:
        try:
            [float(x) for x in rows[0]]
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for i, r in enumerate(rows):
        if len(r) != width:
            raise SchemaError(f"{path}: row {i + 1} has {len(r)} fields, expected {width}")
        try:
            out[i] = [float(x) for x in r]
        except ValueError:
            raise SchemaError(f"{path}: row {i + 1} has a non-numeric field") from None
    if width < 2:
        raise SchemaError(f"{path}: need at least one input column and the output column")
    return out


def ingest_csv(paths, mode: str, lower=None, upper=None, names=None, nested: bool | None = None) -> DatasetFile:
    """Dataset from one CSV per system (last column is the output).

    Systems are given in order: sources then target (multi-source), or
    increasing fidelity (multi-fidelity). Inputs are rescaled to the unit
    box using ``lower``/``upper`` when supplied, otherwise the per-column
    range over all systems. The file names, digests and bounds are kept as
    provenance. Building the data container enforces the same checks as
    fitting does, including the SM1 exclusion of shared source/target points.
    """
    if mode not in MODES:
        raise InputError(f"mode must be one of {MODES}, got {mode!r}")
    tables = [_read_runs(p) for p in paths]
    widths = {t.shape[1] for t in tables}
    if len(widths) != 1:
        raise SchemaError(f"inconsistent column counts across files: {[t.shape[1] for t in tables]}")
    d = widths.pop() - 1
    X_all = np.vstack([t[:, :d] for t in tables])
    inferred = lower is None or upper is None
    lo = np.min(X_all, axis=0) if lower is None else np.asarray(lower, dtype=float).ravel()
    hi = np.max(X_all, axis=0) if upper is None else np.asarray(upper, dtype=float).ravel()
    if lo.shape != (d,) or hi.shape != (d,):
        raise SchemaError(f"bounds must have {d} entries each")
    if np.any(hi <= lo):
        raise SchemaError("every input column needs upper > lower (a constant column cannot be rescaled)")
    if np.any(X_all < lo - 1e-12) or np.any(X_all > hi + 1e-12):
        raise SchemaError("input values fall outside the supplied bounds")
    if names is None:
        names = ([f"source{l + 1}" for l in range(len(paths) - 1)] + ["target"] if mode == MULTI_SOURCE
                 else [f"level{l + 1}" for l in range(len(paths))])
    systems = [(n, (t[:, :d] - lo) / (hi - lo), t[:, d].copy()) for n, t in zip(names, tables)]
    prov = {"ingested_from": [{"path": os.path.basename(str(p)), "sha256": _sha256(p), "rows": len(t)}
                              for p, t in zip(paths, tables)],
            "bounds_inferred": bool(inferred)}
    ds = DatasetFile(mode, systems, tuple(lo.tolist()), tuple(hi.tolist()), nested, prov)
    data = ds.to_data()
    if isinstance(data, MultiFidelityData):
        ds.nested = bool(data.nested)
    return ds


def export_csv(ds: DatasetFile, out_dir) -> list[str]:
    """One CSV per system in the original input units (inverse of :func:`ingest_csv`)."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, X, y in ds.systems:
        p = os.path.join(out_dir, f"{name}.csv")
        cols = [f"x{j + 1}" for j in range(X.shape[1])] + ["y"]
        write_table(p, cols, np.column_stack([ds.from_unit(X), y]))
        paths.append(p)
    return paths


# -- model bundles -------------------------------------------------------------

def model_to_bundle(model, ds: DatasetFile) -> dict:
    """Everything needed to predict without refitting (the kept chain included)."""
    from .models import GPModel, KOSurrogate, LOLGP

    doc = {"bundle_version": BUNDLE_VERSION, "model": model.name, "seed": int(model.seed),
           "standardizer": {"shift": model.standardizer.shift, "scale": model.standardizer.scale},
           "dataset": ds.to_dict()}
    if isinstance(model, GPModel):
        doc["fit"] = {"kernel": model.fitted.kernel.to_dict()}
    elif isinstance(model, KOSurrogate):
        doc["fit"] = {"kernels": [k.to_dict() for k in model.fitted.kernels],
                      "rho": list(map(float, model.fitted.rho)), "loglik": float(model.fitted.loglik)}
    elif isinstance(model, LOLGP):
        cfg = model.config
        doc["fit"] = {"hp": model.hp.to_dict(), "chain": model.chain.to_dict(), "nested": model.nested,
                      "config": {"iterations": cfg.iterations, "burn_in": cfg.burn_in,
                                 "activation": cfg.activation, "block_omega": cfg.block_omega},
                      "restarts": model.restarts}
    else:
        raise TypeError(f"cannot bundle {type(model).__name__}")
    return doc


def model_from_bundle(doc: dict):
    """Rebuild a fitted surrogate from :func:`model_to_bundle` output."""
    from .baselines import GPOnly, KOModel, KOStructure
    from .hyperopt import TrainResult
    from .models import GPModel, KOSurrogate, LOLGP
    from .state import Chain, LOLGPConfig

    if not isinstance(doc, dict) or doc.get("bundle_version") != BUNDLE_VERSION:
        raise SchemaError(f"field 'bundle_version': expected {BUNDLE_VERSION}")
    for key in ("model", "seed", "standardizer", "dataset", "fit"):
        if key not in doc:
            raise SchemaError(f"bundle field {key!r} is missing")
    ds = DatasetFile.from_dict(doc["dataset"])
    data = ds.to_data()
    st = Standardizer(float(doc["standardizer"]["shift"]), float(doc["standardizer"]["scale"]))
    std = data.standardized(st)
    fit, name, seed = doc["fit"], doc["model"], int(doc["seed"])
    try:
        if name == "gp":
            X, f = std.target
            model = GPModel(seed=seed, fitted=GPOnly(KernelSpec.from_dict(fit["kernel"]), X, f))
        elif name == "ko":
            model = KOSurrogate(seed=seed, fitted=KOModel(
                tuple(KernelSpec.from_dict(k) for k in fit["kernels"]), tuple(fit["rho"]),
                KOStructure.from_data(std), fit.get("loglik", float("nan"))))
        elif name in ("lolgp", "bko"):
            c = fit["config"]
            cfg = LOLGPConfig(iterations=c["iterations"], burn_in=c["burn_in"], activation=c["activation"],
                              seed=seed, block_omega=c.get("block_omega", True))
            model = LOLGP(name=name, seed=seed, config=cfg, nested=fit.get("nested"),
                          restarts=int(fit.get("restarts", 5)))
            model._std_data = std
            model.result = TrainResult(HyperParams.from_dict(fit["hp"]), Chain.from_dict(fit["chain"]), None, None)
        else:
            raise SchemaError(f"field 'model': unknown model {name!r}")
    except (KeyError, TypeError) as e:
        raise SchemaError(f"bundle field 'fit' is malformed: {e}") from None
    model.standardizer = st
    model.data = data
    return model, ds


def save_bundle(model, ds: DatasetFile, path) -> None:
    dump_json(model_to_bundle(model, ds), path)


def load_bundle(path):
    return model_from_bundle(load_json(path, "model bundle"))
