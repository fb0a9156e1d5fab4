"""Test functions, designs and the experiment harness."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lolgp.bench.designs import equispaced, latin_hypercube, nested_lhd, offset_equispaced
from lolgp.bench.experiments import EXPERIMENTS, RESULT_COLUMNS, get_experiment, run_experiment
from lolgp.bench.functions import SUITE, eval_testfn, forrester
from lolgp.core.kernels import InputError
from lolgp.data import match_rows
from lolgp.state import LOLGPConfig


def test_forrester_reference_values():
    # 0.2 (6x - 2)^2 sin(12x - 4) + 0.5
    assert float(forrester(0.0)) == pytest.approx(0.2 * 4 * np.sin(-4) + 0.5)
    assert float(forrester(1.0)) == pytest.approx(0.2 * 16 * np.sin(8) + 0.5)
    assert float(forrester(1 / 3)) == pytest.approx(0.5)


def test_suite_shapes_and_domains():
    for name, fn in SUITE.items():
        rng = np.random.default_rng(0)
        X = fn.from_unit(rng.random((6, fn.dim)))
        for role in fn.roles:
            y = eval_testfn(name, role, X if fn.dim > 1 else X[:, 0])
            assert y.shape == (6,) and np.all(np.isfinite(y))
        with pytest.raises(InputError):
            fn.evaluate(0, np.full((1, fn.dim), np.asarray(fn.upper) + 1.0))


def test_local_structure_of_the_sources():
    fn = SUITE["forrester-ms"]
    lo, hi = np.linspace(0, 0.49, 50), np.linspace(0.51, 1, 50)
    # source 1 follows the target up to a linear term on x < 0.5, source 2 on x >= 0.5
    np.testing.assert_allclose(fn.evaluate("source1", lo) - forrester(lo), 0.4 * (lo - 0.5))
    np.testing.assert_allclose(fn.evaluate("source2", hi) - forrester(hi), 0.4 * (hi - 0.5))


def test_branch_convention_only_changes_the_flagged_region():
    fn = SUITE["forrester-mf"]
    x = np.linspace(0, 1, 101)
    a, b = fn.evaluate("level2", x, "abs"), fn.evaluate("level2", x, "real-part")
    np.testing.assert_array_equal(a[x > 0.5], b[x > 0.5])
    assert not np.allclose(a[x < 0.5], b[x < 0.5])


def test_branin_levels_relation():
    fn = SUITE["branin-mf"]
    X = np.array([[0.0, 5.0], [3.0, 10.0]])
    np.testing.assert_allclose(fn.evaluate("level3", X), (X[:, 1] - 3) / 7 * fn.evaluate("level2", X))


def test_simple_designs():
    np.testing.assert_allclose(equispaced(5)[:, 0], [0, 0.25, 0.5, 0.75, 1])
    np.testing.assert_allclose(offset_equispaced(4)[:, 0], [0.125, 0.375, 0.625, 0.875])
    with pytest.raises(InputError):
        equispaced(0)


def _is_lhd(X):
    n = len(X)
    return all(sorted(np.floor(X[:, j] * n).astype(int)) == list(range(n)) for j in range(X.shape[1]))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 30), st.integers(1, 5), st.integers(0, 10**6))
def test_latin_hypercube_strata(n, d, seed):
    X = latin_hypercube(n, d, np.random.default_rng(seed))
    assert X.shape == (n, d) and _is_lhd(X)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([(12, 6, 3), (48, 24, 12), (8, 8), (20, 5, 1)]), st.integers(1, 3), st.integers(0, 10**6))
def test_nested_lhd(sizes, d, seed):
    levels = nested_lhd(sizes, d, np.random.default_rng(seed))
    for big, small in zip(levels, levels[1:]):
        assert np.all(match_rows(small, big) >= 0)
    assert all(_is_lhd(X) for X in levels)


def test_nested_lhd_validation():
    with pytest.raises(InputError):
        nested_lhd((10, 4), 2, np.random.default_rng(0))
    with pytest.raises(InputError):
        nested_lhd((4, 8), 2, np.random.default_rng(0))


def test_experiments_build_valid_data():
    for name, exp in EXPERIMENTS.items():
        data, X_test, truth = exp.build(seed=1)
        assert len(X_test) == len(truth) and np.all(np.isfinite(truth))
        assert data.dim == SUITE[exp.function].dim
    mf, _, _ = get_experiment("forrester-mf").build(1)
    assert mf.nested and len(mf.levels[1][0]) == 7
    with pytest.raises(InputError):
        get_experiment("nope")


def test_run_experiment_writes_tables(tmp_path):
    cfg = LOLGPConfig(iterations=300, burn_in=100)
    res = run_experiment("forrester-mf", (1,), ("gp", "lolgp"), cfg, restarts=1, out_dir=str(tmp_path),
                         timing=False)
    assert [r["model"] for r in res.rows] == ["gp", "lolgp"]
    header = (tmp_path / "results.csv").read_text().splitlines()[0]
    assert header == ",".join(RESULT_COLUMNS)
    doc = json.loads((tmp_path / "results.json").read_text())
    assert doc["rows"][0]["fit_seconds"] is None
    curves = (tmp_path / "curves_lolgp.csv").read_text().splitlines()[0].split(",")
    assert {"x1", "mean", "q2.5", "omega1_mean", "rho1_mean"} <= set(curves)
