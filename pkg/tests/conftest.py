"""Random tiny instances shared by the test modules, plus the acceptance summary."""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from lolgp.core.kernels import KernelSpec  # noqa: E402
from lolgp.data import MultiFidelityData, MultiSourceData  # noqa: E402
from lolgp.params import HyperParams  # noqa: E402
from lolgp.state import LatentState  # noqa: E402


def random_kernel(rng, dim=1):
    return KernelSpec(float(rng.uniform(0.5, 2.0)), tuple(rng.uniform(0.3, 0.9, dim)), 1e-6)


def tiny_ms(rng, n_sources=1, n_src=4, n_target=3, dim=1):
    """Random multi-source data with distinct source and target inputs."""
    pts = rng.permutation(np.linspace(0.0, 1.0, n_sources * n_src + n_target + 3))[:, None]
    pts = pts if dim == 1 else rng.random((n_sources * n_src + n_target, dim))
    sources = []
    for l in range(n_sources):
        X = pts[l * n_src:(l + 1) * n_src]
        sources.append((X, np.sin(6 * X[:, 0] + l) + 0.1 * rng.standard_normal(n_src)))
    XT = pts[n_sources * n_src:n_sources * n_src + n_target]
    data = MultiSourceData(tuple(sources), (XT, np.sin(6 * XT[:, 0]) + 0.2 * rng.standard_normal(n_target)))
    hp = HyperParams(tuple(random_kernel(rng, dim) for _ in range(n_sources)),
                     tuple(random_kernel(rng, dim) for _ in range(n_sources)), (random_kernel(rng, dim),))
    state = LatentState(tuple(rng.normal(0.2, 1.0, n_target) for _ in range(n_sources)),
                        tuple(rng.standard_normal(n_target) for _ in range(n_sources)))
    return data, hp, state


def tiny_mf(rng, sizes=(4, 3), nested=True, dim=1):
    """Random multi-fidelity data; non-nested designs get extra top-level points."""
    n0 = sizes[0]
    X0 = rng.permutation(np.linspace(0.0, 1.0, 2 * n0))[:n0][:, None]
    levels = [X0]
    for n in sizes[1:]:
        prev = levels[-1]
        X = prev[rng.choice(len(prev), n, replace=False)]
        if not nested:
            X = np.vstack([X[:-1], [[float(rng.uniform(0.02, 0.98))]]])
        levels.append(X)
    data = MultiFidelityData(tuple((X, np.cos(5 * X[:, 0] + k) + 0.1 * rng.standard_normal(len(X)))
                                   for k, X in enumerate(levels)))
    T = len(sizes) - 1
    hp = HyperParams((random_kernel(rng, dim),), tuple(random_kernel(rng, dim) for _ in range(T)),
                     tuple(random_kernel(rng, dim) for _ in range(T)))
    return data, hp


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance checks append their PASS/FAIL lines here; they are echoed at the
# end of the run because pytest captures stdout of passing tests
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
