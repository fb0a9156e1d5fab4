"""``lolgp`` command-line interface.

Subcommands: ``gen``, ``fit``, ``predict``, ``metrics``, ``experiment`` and
``ingest``. Exit status is 0 on success, 2 for input or schema errors and 3
for numerical failures. Every command is deterministic given its flags; the
experiment table only records wall-clock times when ``--timing`` is given.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .core.kernels import InputError, NumericalError

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3
NESTED_CHOICES = {"auto": None, "on": True, "off": False}


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"1..5"``, ``"1,3,7"`` or a mix such as ``"1..3,9"``."""
    out = []
    try:
        for part in text.split(","):
            part = part.strip()
            if ".." in part:
                a, b = part.split("..")
                a, b = int(a), int(b)
                if b < a:
                    raise ValueError
                out.extend(range(a, b + 1))
            elif part:
                out.append(int(part))
    except ValueError:
        raise InputError(f"cannot parse seed list {text!r}; use e.g. 1..5 or 1,2,3") from None
    if not out:
        raise InputError("empty seed list")
    return tuple(out)


def _config(args, seed: int):
    from .state import LOLGPConfig

    return LOLGPConfig(iterations=args.chain_length, burn_in=args.burn_in, seed=seed,
                       block_omega=not args.single_site)


def _sampler_flags(p):
    p.add_argument("--chain-length", type=int, default=10000, help="total sweeps including burn-in")
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--restarts", type=int, default=5, help="optimizer restarts")
    p.add_argument("--nested", choices=sorted(NESTED_CHOICES), default="auto",
                   help="multi-fidelity predictor: nested recursion, generic, or detect from the designs")
    p.add_argument("--single-site", action="store_true",
                   help="disable the block moves on latent-weight vectors")
    p.add_argument("--prior-sd", type=float, default=1.0,
                   help="sd of the normal prior on log variances and log lengthscales")


def _prior(args):
    from .hyperopt import PriorSpec

    if not args.prior_sd > 0:
        raise InputError(f"--prior-sd must be positive, got {args.prior_sd}")
    return PriorSpec(0.0, args.prior_sd)


def cmd_gen(args):
    from .bench.experiments import get_experiment
    from .bench.functions import SUITE
    from .io import DatasetFile, save_dataset, write_table

    exp = get_experiment(args.name)
    fn = SUITE[exp.function]
    data, X_test, truth = exp.build(args.seed, args.branch)
    ds = DatasetFile.from_data(data, names=fn.roles, lower=fn.lower, upper=fn.upper,
                               provenance={"generator": exp.name, "seed": args.seed, "branch": args.branch})
    save_dataset(ds, args.out)
    if args.test_out:
        cols = [f"x{j + 1}" for j in range(X_test.shape[1])] + ["y"]
        write_table(args.test_out, cols, np.column_stack([X_test, truth]))
    return EXIT_OK


def cmd_fit(args):
    from .io import load_dataset, load_json, save_bundle
    from .models import MODEL_NAMES, make_model

    if args.config:
        cfg = load_json(args.config, "run config")
        if not isinstance(cfg, dict):
            raise InputError("run config must be a JSON object")
        known = set(_FIT_DEFAULTS)
        extra = set(cfg) - known
        if extra:
            raise InputError(f"run config: unknown field(s) {sorted(extra)}")
        for key, val in cfg.items():
            if getattr(args, key) == _FIT_DEFAULTS[key]:
                setattr(args, key, val)
    if args.model not in MODEL_NAMES:
        raise InputError(f"field 'model': choose from {', '.join(MODEL_NAMES)}")
    if args.restarts < 0:
        raise InputError("restarts must be >= 0")
    ds = load_dataset(args.dataset)
    data = ds.to_data()
    model = make_model(args.model, args.seed, _config(args, args.seed), args.restarts,
                       NESTED_CHOICES[args.nested], _prior(args))
    model.fit(data)
    save_bundle(model, ds, args.out)
    return EXIT_OK


_FIT_DEFAULTS = {"model": "lolgp", "chain_length": 10000, "burn_in": 1000, "restarts": 5, "seed": 0,
                 "nested": "auto", "single_site": False, "prior_sd": 1.0}


def cmd_predict(args):
    from .io import load_bundle, read_inputs, write_predictions

    model, ds = load_bundle(args.bundle)
    X = read_inputs(args.inputs, ds.dim)
    if len(X) == 0:
        write_predictions(args.out, X, None)
        return EXIT_OK
    pred = model.predict(X)
    if not (np.all(np.isfinite(pred.mean)) and np.all(np.isfinite(pred.sd))):
        raise NumericalError("prediction produced non-finite values")
    write_predictions(args.out, X, pred)
    return EXIT_OK


def cmd_metrics(args):
    from .io import dump_json, read_column, read_table
    from .metrics import crps_gaussian, rmse

    header, vals = read_table(args.predictions)
    for c in ("mean", "sd", "q2.5", "q97.5"):
        if c not in header:
            raise InputError(f"{args.predictions}: missing column {c!r}")
    col = {c: vals[:, header.index(c)] for c in header}
    truth = read_column(args.truth, args.truth_column)
    if len(truth) != len(vals):
        raise InputError(f"{len(vals)} predictions but {len(truth)} truth values")
    if len(truth) == 0:
        raise InputError("no test points to score")
    report = {"n_test": int(len(truth)),
              "rmse": rmse(col["mean"], truth),
              "crps_gaussian": float(np.mean(crps_gaussian(col["mean"], col["sd"], truth))),
              "coverage95": float(np.mean((truth >= col["q2.5"]) & (truth <= col["q97.5"])))}
    if not all(np.isfinite(v) for v in report.values()):
        raise NumericalError(f"non-finite metric: {report}")
    if args.out:
        dump_json(report, args.out)
    else:
        print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def cmd_experiment(args):
    from .bench.experiments import get_experiment, run_experiment
    from .models import MODEL_NAMES

    get_experiment(args.name)
    models = tuple(m.strip() for m in args.models.split(",")) if args.models else MODEL_NAMES
    bad = [m for m in models if m not in MODEL_NAMES]
    if bad:
        raise InputError(f"unknown model(s) {bad}; choose from {', '.join(MODEL_NAMES)}")
    seeds = parse_seeds(args.seeds) if args.seeds else (args.seed,)
    res = run_experiment(args.name, seeds, models, _config(args, seeds[0]), args.restarts, args.out,
                         args.branch, args.timing, NESTED_CHOICES[args.nested], prior=_prior(args))
    for s in res.summary():
        print(f"{s['model']:>6}  rmse {s['rmse']:.4f}  crps {s['crps']:.4f}  ess_min {s['ess_min']:.1f}")
    return EXIT_OK


def cmd_ingest(args):
    from .io import ingest_csv, save_dataset

    def floats(text):
        if text is None:
            return None
        try:
            return [float(v) for v in text.split(",")]
        except ValueError:
            raise InputError(f"cannot parse bounds {text!r}; use comma-separated numbers") from None

    names = args.names.split(",") if args.names else None
    if names is not None and len(names) != len(args.csv):
        raise InputError(f"{len(names)} names for {len(args.csv)} files")
    ds = ingest_csv(args.csv, args.mode, floats(args.lower), floats(args.upper), names,
                    NESTED_CHOICES[args.nested])
    save_dataset(ds, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    from .bench.experiments import EXPERIMENTS
    from .bench.functions import BRANCHES, DEFAULT_BRANCH
    from .models import MODEL_NAMES

    p = argparse.ArgumentParser(prog="lolgp", description="Local transfer GP surrogates.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a benchmark dataset (and optionally its test set)")
    g.add_argument("name", help=f"one of: {', '.join(EXPERIMENTS)}")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--branch", choices=BRANCHES, default=DEFAULT_BRANCH)
    g.add_argument("--out", required=True, help="dataset JSON path")
    g.add_argument("--test-out", help="CSV of test inputs x1..xd and the true output y")
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("fit", help="fit a surrogate and write a model bundle")
    f.add_argument("dataset")
    f.add_argument("--config", help="JSON run config; explicit flags take precedence")
    f.add_argument("--model", default="lolgp", help=f"one of: {', '.join(MODEL_NAMES)}")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", required=True, help="bundle JSON path")
    _sampler_flags(f)
    f.set_defaults(func=cmd_fit)

    q = sub.add_parser("predict", help="predict at test inputs from a model bundle")
    q.add_argument("bundle")
    q.add_argument("inputs", help="CSV with columns x1..xd (extra columns are ignored)")
    q.add_argument("--out", required=True, help="predictions CSV path")
    q.set_defaults(func=cmd_predict)

    m = sub.add_parser("metrics", help="score a predictions CSV")
    m.add_argument("predictions")
    m.add_argument("--truth", required=True, help="CSV holding the true outputs")
    m.add_argument("--truth-column", default="y")
    m.add_argument("--out", help="JSON path (default: print to stdout)")
    m.set_defaults(func=cmd_metrics)

    e = sub.add_parser("experiment", help="run a benchmark experiment over seeds and models")
    e.add_argument("name", help=f"one of: {', '.join(EXPERIMENTS)}")
    e.add_argument("--seeds", help="seed list such as 1..5 (default: --seed)")
    e.add_argument("--seed", type=int, default=1)
    e.add_argument("--models", help="comma-separated subset of " + ",".join(MODEL_NAMES))
    e.add_argument("--model", dest="models", help="alias of --models")
    e.add_argument("--branch", choices=BRANCHES, default=DEFAULT_BRANCH)
    e.add_argument("--timing", action="store_true", help="record wall-clock fit times (not reproducible)")
    e.add_argument("--out", required=True, help="output directory")
    _sampler_flags(e)
    e.set_defaults(func=cmd_experiment)

    i = sub.add_parser("ingest", help="build a dataset from one CSV per system")
    i.add_argument("csv", nargs="+", help="sources then target, or increasing fidelity")
    i.add_argument("--mode", required=True, choices=["multi-source", "multi-fidelity"])
    i.add_argument("--lower", help="comma-separated lower bounds (default: data minimum)")
    i.add_argument("--upper", help="comma-separated upper bounds (default: data maximum)")
    i.add_argument("--names", help="comma-separated system names")
    i.add_argument("--nested", choices=sorted(NESTED_CHOICES), default="auto")
    i.add_argument("--out", required=True, help="dataset JSON path")
    i.set_defaults(func=cmd_ingest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as e:
        print(f"lolgp {args.command}: input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"lolgp {args.command}: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
