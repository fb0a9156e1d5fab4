"""Reference surrogates: target-only GP and Kennedy-O'Hagan with constant transfer.

The KO joint covariance over all observed outputs is a sum over kernels
``j`` of ``c_j[group(a), group(b)] * K_j(x_a, x_b)``, where the coefficient
matrices ``c_j`` depend only on the transfer scalars:

* multi-source (groups: sources then target): source kernel ``l`` has
  ``c[l, l] = 1``, ``c[l, T] = rho_l`` and ``c[T, T] = rho_l**2``; the
  discrepancy kernel has ``c[T, T] = 1``;
* multi-fidelity (groups: levels): the kernel entering at level ``j`` has
  ``c[a, b] = P(j, a) P(j, b)`` for ``a, b >= j`` with
  ``P(j, a) = rho_j ... rho_{a-1}``.

Bayesian KO is the LOL-GP sampler with the identity activation (see
:class:`lolgp.models.LOLGP`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .core.gp import LOG_2PI, cholesky, gp_fit, gp_predict
from .core.kernels import DEFAULT_NUGGET, InputError, KernelSpec, NumericalError, cov, cov_with_grad
from .data import MultiFidelityData, MultiSourceData
from .hyperopt import FLAT, LOG_LS_BOUNDS, LOG_VAR_BOUNDS, Term, optimize_term
from .predictive import GaussianPrediction
from .state import rng_stream

RHO_BOUNDS = (-10.0, 10.0)
GP_STREAM, KO_STREAM = 4, 5


# -- target-only GP -------------------------------------------------------

@dataclass(frozen=True)
class GPOnly:
    kernel: KernelSpec
    X: np.ndarray
    f: np.ndarray

    def predict(self, X_new) -> GaussianPrediction:
        mean, var = gp_predict(gp_fit(self.X, self.f, self.kernel), X_new)
        return GaussianPrediction(mean, var)


def fit_gp_only(X, f, restarts: int = 5, seed: int = 0, nugget: float = DEFAULT_NUGGET) -> GPOnly:
    """Maximum-likelihood squared-exponential GP on a single system."""
    X = np.asarray(X, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    f = np.asarray(f, dtype=float).ravel()
    if len(f) < 2:
        raise InputError("the target-only GP needs at least 2 observations")
    spec0 = KernelSpec.isotropic(X.shape[1], 1.0, 0.5, nugget)
    spec, *_ = optimize_term(Term("delta", 0, X, f), spec0, FLAT, restarts, rng_stream(seed, GP_STREAM))
    return GPOnly(spec, X, f)


# -- Kennedy-O'Hagan -------------------------------------------------------

@dataclass(frozen=True)
class KOStructure:
    """Stacked design, group labels and coefficient rules for one data set."""

    mode: str
    X: np.ndarray
    y: np.ndarray
    group: np.ndarray
    n_groups: int
    target: int

    @classmethod
    def from_data(cls, data) -> "KOStructure":
        if isinstance(data, MultiSourceData):
            systems = list(data.sources) + [data.target]
            mode = "ms"
        elif isinstance(data, MultiFidelityData):
            systems = list(data.levels)
            mode = "mf"
        else:
            raise TypeError(f"unsupported data type {type(data).__name__}")
        X = np.vstack([s[0] for s in systems])
        y = np.concatenate([s[1] for s in systems])
        group = np.concatenate([np.full(len(s[1]), g) for g, s in enumerate(systems)])
        return cls(mode, X, y, group, len(systems), len(systems) - 1)

    @property
    def n_kernels(self) -> int:
        return self.n_groups

    @property
    def n_rho(self) -> int:
        return self.n_groups - 1

    def coef(self, rho) -> np.ndarray:
        """``c[j]`` as an array of shape (n_kernels, n_groups, n_groups)."""
        G, T = self.n_groups, self.target
        c = np.zeros((G, G, G))
        if self.mode == "ms":
            for l in range(T):
                c[l, l, l] = 1.0
                c[l, l, T] = c[l, T, l] = rho[l]
                c[l, T, T] = rho[l] ** 2
            c[T, T, T] = 1.0
            return c
        P = self._paths(rho)
        for j in range(G):
            c[j] = np.outer(P[j], P[j])
        return c

    def _paths(self, rho, skip: int | None = None) -> np.ndarray:
        G = self.n_groups
        P = np.zeros((G, G))
        for j in range(G):
            for a in range(j, G):
                P[j, a] = np.prod([rho[i] for i in range(j, a) if i != skip])
        return P

    def coef_grad(self, rho, i: int) -> np.ndarray:
        """Derivative of :meth:`coef` with respect to ``rho[i]``."""
        G, T = self.n_groups, self.target
        d = np.zeros((G, G, G))
        if self.mode == "ms":
            d[i, i, T] = d[i, T, i] = 1.0
            d[i, T, T] = 2.0 * rho[i]
            return d
        P = self._paths(rho)
        Q = self._paths(rho, skip=i)
        for j in range(G):
            dP = np.array([Q[j, a] if j <= i < a else 0.0 for a in range(G)])
            d[j] = np.outer(dP, P[j]) + np.outer(P[j], dP)
        return d

    def expand(self, c: np.ndarray, rows, cols) -> np.ndarray:
        return c[np.ix_(rows, cols)]


@dataclass(frozen=True)
class KOModel:
    """Fitted KO surrogate: one kernel per level or system plus the transfer scalars."""

    kernels: tuple[KernelSpec, ...]
    rho: tuple[float, ...]
    structure: KOStructure = field(repr=False)
    loglik: float = float("nan")

    def joint_cov(self) -> np.ndarray:
        s = self.structure
        c = s.coef(np.asarray(self.rho))
        C = np.zeros((len(s.y), len(s.y)))
        for j, k in enumerate(self.kernels):
            C += s.expand(c[j], s.group, s.group) * cov(k, s.X)
        return C

    def predict(self, X_new) -> GaussianPrediction:
        return predict_ko(self, X_new)


def _ko_loglik(struct: KOStructure, kernels, rho, with_grad=False):
    n = len(struct.y)
    c = struct.coef(rho)
    C = np.zeros((n, n))
    dK = []
    for j, k in enumerate(kernels):
        # stacked designs repeat points across levels, so build K with the
        # coincidence nugget; the derivatives never involve the nugget
        K = cov(k, struct.X)
        D = cov_with_grad(k, struct.X)[1] if with_grad else None
        cj = struct.expand(c[j], struct.group, struct.group)
        C += cj * K
        dK.append((cj, K, D))
    nug = max(k.nugget for k in kernels)
    L, _ = cholesky(C, nug)
    alpha = linalg.cho_solve((L, True), struct.y)
    ll = float(-0.5 * struct.y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * LOG_2PI)
    if not with_grad:
        return ll
    W = np.outer(alpha, alpha) - linalg.cho_solve((L, True), np.eye(n))
    g = []
    for cj, K, D in dK:
        g.extend(0.5 * np.sum(W * cj * Dm) for Dm in D)
    for i in range(struct.n_rho):
        dc = struct.coef_grad(rho, i)
        dC = sum(struct.expand(dc[j], struct.group, struct.group) * dK[j][1] for j in range(len(kernels)))
        g.append(0.5 * np.sum(W * dC))
    return ll, np.array(g)


def _unpack(struct, theta, nuggets, dim):
    kernels, pos = [], 0
    for j in range(struct.n_kernels):
        t = theta[pos:pos + dim + 1]
        kernels.append(KernelSpec(float(np.exp(t[0])), tuple(np.exp(t[1:])), nuggets[j]))
        pos += dim + 1
    return kernels, np.asarray(theta[pos:pos + struct.n_rho])


def ko_loglik(struct: KOStructure, theta, dim: int, nugget: float = DEFAULT_NUGGET, with_grad=False):
    """Joint log-likelihood at packed parameters ``[log kernel params..., rho...]``."""
    kernels, rho = _unpack(struct, np.asarray(theta, float), [nugget] * struct.n_kernels, dim)
    return _ko_loglik(struct, kernels, rho, with_grad)


def fit_ko(data, restarts: int = 5, seed: int = 0, fixed_rho=None,
           nugget: float = DEFAULT_NUGGET) -> KOModel:
    """Maximum-likelihood KO fit of all kernels and transfer scalars jointly.

    ``fixed_rho`` (scalar or one value per transfer) holds the scalars fixed
    and fits the kernels only.
    """
    struct = KOStructure.from_data(data)
    dim = struct.X.shape[1]
    n_k = struct.n_kernels * (dim + 1)
    rng = rng_stream(seed, KO_STREAM)
    if fixed_rho is not None:
        fixed = np.broadcast_to(np.asarray(fixed_rho, dtype=float), (struct.n_rho,)).copy()
    bounds = ([LOG_VAR_BOUNDS] + [LOG_LS_BOUNDS] * dim) * struct.n_kernels
    if fixed_rho is None:
        bounds += [RHO_BOUNDS] * struct.n_rho

    def full(theta):
        return theta if fixed_rho is None else np.concatenate([theta, fixed])

    def neg(theta):
        try:
            v, g = ko_loglik(struct, full(theta), dim, nugget, with_grad=True)
        except NumericalError:
            return 1e25, np.zeros_like(theta)
        return -v, -g[:len(theta)]

    best = None
    for k in range(restarts):
        if k == 0:
            x0 = np.concatenate([np.tile(np.concatenate([[0.0], np.full(dim, np.log(0.5))]), struct.n_kernels),
                                 np.ones(struct.n_rho)])
        else:
            x0 = np.concatenate([np.concatenate([[rng.uniform(np.log(0.05), np.log(5.0))],
                                                 rng.uniform(np.log(0.05), np.log(2.0), dim)])
                                 for _ in range(struct.n_kernels)] + [rng.normal(1.0, 0.5, struct.n_rho)])
        x0 = x0 if fixed_rho is None else x0[:n_k]
        res = optimize.minimize(neg, x0, jac=True, method="L-BFGS-B", bounds=bounds)
        if best is None or res.fun < best.fun:
            best = res
    if best.fun >= 1e25:
        raise NumericalError("KO likelihood could not be evaluated at any restart")
    kernels, rho = _unpack(struct, full(best.x), [nugget] * struct.n_kernels, dim)
    return KOModel(tuple(kernels), tuple(float(r) for r in rho), struct, -float(best.fun))


def predict_ko(model: KOModel, X_new) -> GaussianPrediction:
    """Closed-form Gaussian predictive of the target system."""
    s = model.structure
    X_new = np.asarray(X_new, dtype=float).reshape(-1, s.X.shape[1])
    c = s.coef(np.asarray(model.rho))
    C = model.joint_cov()
    tgt = np.full(len(X_new), s.target)
    Ks = np.zeros((len(s.y), len(X_new)))
    prior = np.zeros(len(X_new))
    for j, k in enumerate(model.kernels):
        Ks += s.expand(c[j], s.group, tgt) * cov(k, s.X, X_new)
        prior += c[j][s.target, s.target] * (k.variance + k.nugget)
    L, _ = cholesky(C, max(k.nugget for k in model.kernels))
    mean = Ks.T @ linalg.cho_solve((L, True), s.y)
    v = linalg.solve_triangular(L, Ks, lower=True)
    return GaussianPrediction(mean, np.maximum(prior - np.sum(v * v, axis=0), 0.0))
