"""Target-only GP, Kennedy-O'Hagan and the identity-activation sampler."""

import numpy as np
import pytest

from conftest import tiny_mf, tiny_ms
from lolgp.baselines import KOModel, KOStructure, fit_gp_only, fit_ko, ko_loglik
from lolgp.core.kernels import KernelSpec, cov
from lolgp.data import MultiSourceData
from lolgp.models import LOLGP
from lolgp.params import HyperParams
from lolgp.state import LOLGPConfig
from oracles import dense_gauss_logpdf, mf_dense_cov


def _pack(kernels, rho):
    return np.concatenate([np.concatenate([k.to_log() for k in kernels]), rho])


def test_ko_likelihood_matches_brute_force_mf(rng):
    for _ in range(5):
        data, hp = tiny_mf(rng, (7, 4, 2))
        rho = rng.normal(0.5, 0.8, 2)
        kernels = [hp.f[0], *hp.delta]
        y = np.concatenate([f for _, f in data.levels])
        C = mf_dense_cov(data, hp, [np.full(len(X), r) for (X, _), r in zip(data.levels[1:], rho)])
        got = ko_loglik(KOStructure.from_data(data), _pack(kernels, rho), 1, nugget=1e-6)
        assert got == pytest.approx(dense_gauss_logpdf(y, C), rel=1e-8)


def test_ko_likelihood_matches_brute_force_ms(rng):
    data, hp, _ = tiny_ms(rng, n_sources=2, n_src=4, n_target=3)
    rho = np.array([0.7, -0.4])
    (X1, f1), (X2, f2) = data.sources
    XT, fT = data.target
    k1, k2, kd = hp.f[0], hp.f[1], hp.delta[0]
    C = np.block([[cov(k1, X1), np.zeros((4, 4)), rho[0] * cov(k1, X1, XT)],
                  [np.zeros((4, 4)), cov(k2, X2), rho[1] * cov(k2, X2, XT)],
                  [rho[0] * cov(k1, XT, X1), rho[1] * cov(k2, XT, X2),
                   rho[0] ** 2 * cov(k1, XT) + rho[1] ** 2 * cov(k2, XT) + cov(kd, XT)]])
    got = ko_loglik(KOStructure.from_data(data), _pack([k1, k2, kd], rho), 1, nugget=1e-6)
    assert got == pytest.approx(dense_gauss_logpdf(np.concatenate([f1, f2, fT]), C), abs=1e-8)


def test_ko_gradient_matches_finite_differences(rng):
    data, hp = tiny_mf(rng, (6, 3))
    s = KOStructure.from_data(data)
    x = _pack([hp.f[0], hp.delta[0]], np.array([0.8]))
    _, g = ko_loglik(s, x, 1, with_grad=True)
    fd = np.array([(ko_loglik(s, x + e, 1) - ko_loglik(s, x - e, 1)) / 2e-6 for e in np.eye(len(x)) * 1e-6])
    np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-5)


def test_ko_with_zero_transfer_is_the_target_only_gp(rng):
    data, _, _ = tiny_ms(rng, n_sources=1, n_src=6, n_target=6)
    X = np.linspace(0, 1, 11)[:, None]
    ko = fit_ko(data, restarts=4, seed=1, fixed_rho=0.0)
    gp = fit_gp_only(*data.target, restarts=4, seed=1)
    a, b = ko.predict(X), gp.predict(X)
    np.testing.assert_allclose(a.mean, b.mean, atol=1e-4)
    np.testing.assert_allclose(a.sd, b.sd, atol=1e-4)


def test_gp_interpolates_its_data(rng):
    X = np.linspace(0, 1, 6)[:, None]
    f = np.sin(4 * X[:, 0])
    pred = fit_gp_only(X, f, restarts=2).predict(X)
    np.testing.assert_allclose(pred.mean, f, atol=1e-3)
    assert np.all(pred.sd < 1e-2)


@pytest.mark.parametrize("mode", ["ms", "mf"])
def test_sampler_with_constant_weights_reproduces_ko(rng, mode):
    if mode == "ms":
        data, _, _ = tiny_ms(rng, n_sources=1, n_src=6, n_target=4)
    else:
        data, _ = tiny_mf(rng, (7, 4))
    ko = fit_ko(data, restarts=2, seed=0)
    ks = ko.kernels
    rho = ko.rho[0]
    w = KernelSpec(1.0, ks[0].lengthscales)
    hp = HyperParams((ks[0],), (w,), (ks[1],))
    model = LOLGP(name="bko", seed=1, hp0=hp, optimize_hp=False,
                  config=LOLGPConfig(iterations=9000, burn_in=1000, activation="identity", fixed_omega=rho))
    model._std_data = data
    model._fit(data)
    X = np.linspace(0.05, 0.95, 7)[:, None]
    a, b = model._predict(X), ko.predict(X)
    se = np.sqrt(a.var / 200.0) + 1e-6
    assert np.all(np.abs(a.mean - b.mean) < 4 * se)
    np.testing.assert_allclose(a.sd, b.sd, rtol=0.1, atol=1e-4)


def test_ko_prediction_on_known_structure():
    # target = 2 * source exactly, so KO should find rho close to 2
    X1 = np.linspace(0.02, 0.98, 15)[:, None]
    XT = np.array([[0.1], [0.45], [0.8]])
    f = lambda x: np.sin(5 * x[:, 0])  # noqa: E731
    ko = fit_ko(MultiSourceData(((X1, f(X1)),), (XT, 2 * f(XT))), restarts=3)
    assert ko.rho[0] == pytest.approx(2.0, abs=0.05)
    assert isinstance(ko, KOModel)
