"""Time the compiled and pure-Python Gibbs sweep kernels on benchmark-sized states.

Usage::

    python benchmarks/bench_sweep.py [--sweeps 200] [--repeats 3]

For each problem the sampler state is built from warm-start hyperparameters
and both backends run the same number of sweeps from the same random
stream. The table reports the best-of-``repeats`` time per sweep, the
speed-up and the largest absolute difference between the two recorded
chains (the backends implement the same arithmetic, so this should sit at
round-off level).
"""

from __future__ import annotations

import argparse
import copy
import time

import numpy as np

from lolgp.bench.experiments import get_experiment
from lolgp.core.sweep import BACKENDS
from lolgp.data import MultiSourceData, Standardizer
from lolgp.hyperopt import warm_start
from lolgp.multifidelity import build_engine_mf, initial_state_mf
from lolgp.multisource import build_engine_ms, initial_state_ms
from lolgp.state import LOLGPConfig

PROBLEMS = ("forrester-ms", "friedman-ms", "forrester-mf", "branin-mf")


def build(name: str, block_omega: bool):
    data, _, _ = get_experiment(name).build(1)
    target = data.target if isinstance(data, MultiSourceData) else data.levels[-1]
    data = data.standardized(Standardizer.from_outputs(target[1]))
    hp = warm_start(data, restarts=1)
    cfg = LOLGPConfig(block_omega=block_omega)
    if isinstance(data, MultiSourceData):
        engine, _ = build_engine_ms(data, hp, cfg, initial_state_ms(data, hp, cfg))
    else:
        engine, _ = build_engine_mf(data, hp, cfg, initial_state_mf(data, hp, cfg))
    return engine


def time_backend(engine, backend: str, sweeps: int, repeats: int):
    best, out = np.inf, None
    for _ in range(repeats):
        # ``run`` advances the engine's state, so each timing starts from a copy
        fresh = copy.deepcopy(engine)
        t0 = time.perf_counter()
        out = fresh.run(sweeps, np.random.default_rng(0), backend)
        best = min(best, time.perf_counter() - t0)
    return best / sweeps, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sweeps", type=int, default=200)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--single-site", action="store_true", help="omit the block moves")
    args = p.parse_args(argv)
    if "compiled" not in BACKENDS:
        raise SystemExit("compiled kernel not built; reinstall with a C compiler and Cython available")
    print(f"{'problem':<14}{'steps':>7}{'python ms/sweep':>17}{'compiled ms/sweep':>19}"
          f"{'speed-up':>10}{'max |diff|':>12}")
    for name in PROBLEMS:
        engine = build(name, not args.single_site)
        tp, a = time_backend(engine, "python", args.sweeps, args.repeats)
        tc, b = time_backend(engine, "compiled", args.sweeps, args.repeats)
        print(f"{name:<14}{len(engine.steps):>7}{1e3 * tp:>17.3f}{1e3 * tc:>19.4f}"
              f"{tp / tc:>10.1f}{np.max(np.abs(a - b)):>12.1e}")


if __name__ == "__main__":
    main()
