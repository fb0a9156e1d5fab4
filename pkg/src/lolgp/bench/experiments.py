"""Experiment harness: build data sets, fit every surrogate, score and tabulate."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..core.gp import conditional_operator
from ..core.kernels import InputError
from ..data import MultiFidelityData, MultiSourceData
from ..metrics import evaluate
from ..models import MODEL_NAMES, LOLGP, make_model
from ..state import LOLGPConfig, activate, rng_stream
from .designs import equispaced, latin_hypercube, nested_lhd, offset_equispaced
from .functions import DEFAULT_BRANCH, SUITE

RESULT_COLUMNS = ("experiment", "model", "seed", "rmse", "crps", "ess_min", "fit_seconds")
DESIGN_STREAM, TEST_STREAM = 10, 11
# the 21-point grid indices closest to 7 equally spaced points (endpoints included)
_NESTED_7 = np.round(np.linspace(0, 20, 7)).astype(int)


def _grid(n_side: int, d: int = 2) -> np.ndarray:
    g = np.linspace(0.0, 1.0, n_side)
    mesh = np.meshgrid(*([g] * d), indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


@dataclass(frozen=True)
class Experiment:
    """Data-generating recipe on the unit box of one suite function."""

    name: str
    function: str
    designs: Callable[[np.random.Generator], list]
    test: Callable[[np.random.Generator], np.ndarray]
    description: str = ""

    def build(self, seed: int = 0, branch: str = DEFAULT_BRANCH):
        """``(data, X_test, truth)`` with inputs on the unit box."""
        fn = SUITE[self.function]
        Xs = self.designs(rng_stream(seed, DESIGN_STREAM))
        systems = [(X, fn.evaluate(k, fn.from_unit(X), branch)) for k, X in enumerate(Xs)]
        if fn.mode == "multi-source":
            data = MultiSourceData(tuple(systems[:-1]), systems[-1])
        else:
            data = MultiFidelityData(tuple(systems))
        X_test = self.test(rng_stream(seed, TEST_STREAM))
        truth = fn.evaluate(len(Xs) - 1, fn.from_unit(X_test), branch)
        return data, X_test, truth


EXPERIMENTS = {
    "forrester-motivating": Experiment(
        "forrester-motivating", "forrester-motivating",
        lambda rng: [offset_equispaced(24), equispaced(8)], lambda rng: equispaced(100),
        "one source, n_S = 24, n_T = 8"),
    "forrester-ms": Experiment(
        "forrester-ms", "forrester-ms",
        lambda rng: [offset_equispaced(32), offset_equispaced(32), equispaced(7)], lambda rng: equispaced(100),
        "two sources, n_1 = n_2 = 32, n_T = 7"),
    "friedman-ms": Experiment(
        "friedman-ms", "friedman-ms",
        lambda rng: [latin_hypercube(60, 5, rng), latin_hypercube(60, 5, rng), latin_hypercube(15, 5, rng)],
        lambda rng: rng.random((500, 5)),
        "two sources, n_1 = n_2 = 60, n_T = 15, 5-d"),
    "forrester-mf": Experiment(
        "forrester-mf", "forrester-mf",
        lambda rng: [equispaced(21), equispaced(21)[_NESTED_7]], lambda rng: equispaced(100),
        "two nested levels, n_1 = 21, n_2 = 7"),
    "branin-mf": Experiment(
        "branin-mf", "branin-mf",
        lambda rng: nested_lhd((48, 24, 12), 2, rng), lambda rng: _grid(20),
        "three nested levels, n = 48/24/12, 2-d"),
    "forrester-mf-no-local": Experiment(
        "forrester-mf-no-local", "forrester-mf-no-local",
        lambda rng: [equispaced(21), equispaced(21)[_NESTED_7]], lambda rng: equispaced(100),
        "global transfer, n_1 = 21, n_2 = 7"),
}


def get_experiment(name: str) -> Experiment:
    if name not in EXPERIMENTS:
        raise InputError(f"unknown experiment {name!r}; available: {', '.join(EXPERIMENTS)}")
    return EXPERIMENTS[name]


@dataclass
class ExperimentResult:
    name: str
    rows: list[dict] = field(default_factory=list)
    curves: dict = field(default_factory=dict)

    def summary(self) -> list[dict]:
        """Seed averages of each metric per model."""
        out = []
        models = list(dict.fromkeys(r["model"] for r in self.rows))
        for m in models:
            rs = [r for r in self.rows if r["model"] == m]
            entry = {"experiment": self.name, "model": m, "n_seeds": len(rs)}
            for key in ("rmse", "crps", "ess_min", "fit_seconds"):
                vals = np.array([r[key] for r in rs], dtype=float)
                entry[key] = float(np.mean(vals)) if np.all(np.isfinite(vals)) else float("nan")
            out.append(entry)
        return out

    def mean(self, model: str, key: str) -> float:
        return next(s[key] for s in self.summary() if s["model"] == model)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_rows_csv(path, rows, columns=RESULT_COLUMNS):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def _json_clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_clean(v) for v in obj]
    return obj


def write_results(out_dir, result: ExperimentResult):
    os.makedirs(out_dir, exist_ok=True)
    write_rows_csv(os.path.join(out_dir, "results.csv"), result.rows)
    doc = {"experiment": result.name, "columns": list(RESULT_COLUMNS),
           "rows": result.rows, "summary": result.summary()}
    with open(os.path.join(out_dir, "results.json"), "w") as fh:
        json.dump(_json_clean(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for model, table in result.curves.items():
        cols = list(table)
        with open(os.path.join(out_dir, f"curves_{model}.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in zip(*(table[c] for c in cols)):
                w.writerow([repr(float(v)) for v in row])


def transfer_curves(model: LOLGP, X) -> dict:
    """Posterior mean and 95% band of each latent weight and the mean transfer weight at ``X``."""
    d, hp, chain = model._std_data, model.hp, model.chain
    out = {}
    if isinstance(d, MultiSourceData):
        designs = [d.target[0]] * d.n_sources
    else:
        from ..multifidelity import MFLayout
        designs = MFLayout.from_data(d).aug[1:]
    rng = rng_stream(model.seed, 20)
    for t, (Xd, w) in enumerate(zip(designs, chain.omega)):
        fixed = chain.frozen_omega[t] if chain.frozen_omega else None
        if fixed is not None:
            draws = np.full((chain.n_kept, len(X)), fixed)
        else:
            A, v = conditional_operator(hp.omega[t], Xd, X)
            draws = w @ A.T + np.sqrt(v) * rng.standard_normal((chain.n_kept, len(X)))
        out[f"omega{t + 1}_mean"] = draws.mean(axis=0)
        out[f"omega{t + 1}_q2.5"] = np.quantile(draws, 0.025, axis=0)
        out[f"omega{t + 1}_q97.5"] = np.quantile(draws, 0.975, axis=0)
        out[f"rho{t + 1}_mean"] = activate(draws, chain.activation).mean(axis=0)
    return out


def run_experiment(name: str, seeds=(1, 2, 3, 4, 5), models=MODEL_NAMES, config: LOLGPConfig | None = None,
                   restarts: int = 5, out_dir: str | None = None, branch: str = DEFAULT_BRANCH,
                   timing: bool = True, nested: bool | None = None, curves: bool = True,
                   prior=None) -> ExperimentResult:
    """Fit and score every requested model for every seed.

    Rows are appended as each fit finishes; with ``out_dir`` the tables are
    rewritten after every row so a failure leaves the finished rows on disk.
    Curves (test-set predictions, plus transfer weights for the sampling
    models) are recorded for the first seed.
    """
    exp = get_experiment(name)
    config = config or LOLGPConfig()
    res = ExperimentResult(name)
    for k, seed in enumerate(seeds):
        data, X_test, truth = exp.build(seed, branch)
        for m in models:
            model = make_model(m, seed, config.with_(seed=seed), restarts, nested, prior)
            try:
                model.fit(data)
                pred = model.predict(X_test)
            except Exception:
                if out_dir:
                    write_results(out_dir, res)
                raise
            rep = evaluate(pred, truth)
            res.rows.append({"experiment": name, "model": m, "seed": int(seed), "rmse": rep.rmse,
                             "crps": rep.crps, "ess_min": model.ess_min(),
                             "fit_seconds": model.fit_seconds if timing else float("nan")})
            if curves and k == 0:
                lo, hi = pred.interval(0.95)
                table = {f"x{j + 1}": X_test[:, j] for j in range(X_test.shape[1])}
                table.update(truth=truth, mean=np.asarray(pred.mean), sd=np.asarray(pred.sd),
                             **{"q2.5": lo, "q97.5": hi})
                if isinstance(model, LOLGP):
                    table.update(transfer_curves(model, X_test))
                res.curves[m] = table
            if out_dir:
                write_results(out_dir, res)
    return res
