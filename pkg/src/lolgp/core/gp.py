"""Plain GP regression on top of stable Cholesky solves."""

from __future__ import annotations

import contextlib
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .kernels import InputError, KernelSpec, NumericalError, as_design, cov, cov_with_grad

MAX_JITTER = 1e-4
LOG_2PI = np.log(2.0 * np.pi)

_factor_log: list[int] | None = None


@contextlib.contextmanager
def record_factorizations():
    """Collect the sizes of every matrix factorized inside the block."""
    global _factor_log
    prev, _factor_log = _factor_log, []
    try:
        yield _factor_log
    finally:
        _factor_log = prev


def cholesky(K: np.ndarray, nugget: float = 0.0) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``K`` with jitter escalation.

    Jitter grows by a factor of ten from ``10 * nugget`` up to ``MAX_JITTER``.
    Returns the factor and the extra jitter that had to be added.
    """
    if _factor_log is not None:
        _factor_log.append(K.shape[0])
    try:
        return linalg.cholesky(K, lower=True), 0.0
    except linalg.LinAlgError:
        pass
    jitter = max(10.0 * nugget, 1e-10)
    eye = np.eye(K.shape[0])
    while jitter <= MAX_JITTER * (1 + 1e-12):
        try:
            return linalg.cholesky(K + jitter * eye, lower=True), jitter
        except linalg.LinAlgError:
            jitter *= 10.0
    raise NumericalError(
        f"covariance of size {K.shape[0]} is not positive definite even with jitter "
        f"{MAX_JITTER:g}; increase the kernel nugget")


def precision(K: np.ndarray, nugget: float = 0.0) -> np.ndarray:
    """Inverse of an SPD matrix via its Cholesky factor."""
    L, _ = cholesky(K, nugget)
    P = linalg.cho_solve((L, True), np.eye(K.shape[0]))
    return 0.5 * (P + P.T)


def gauss_logpdf(r: np.ndarray, K: np.ndarray, nugget: float = 0.0) -> float:
    """log N(r; 0, K)."""
    if len(r) == 0:
        return 0.0
    L, _ = cholesky(K, nugget)
    alpha = linalg.solve_triangular(L, r, lower=True)
    return float(-0.5 * alpha @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * len(r) * LOG_2PI)


def gp_loglik(spec: KernelSpec, X, r, with_grad: bool = False):
    """GP log marginal likelihood of ``r`` at ``X`` (and its log-parameter gradient)."""
    r = np.asarray(r, dtype=float)
    if len(r) == 0:
        return (0.0, np.zeros(spec.dim + 1)) if with_grad else 0.0
    if not with_grad:
        return gauss_logpdf(r, cov(spec, X), spec.nugget)
    K, dK = cov_with_grad(spec, X)
    L, _ = cholesky(K, spec.nugget)
    alpha = linalg.cho_solve((L, True), r)
    ll = float(-0.5 * r @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * len(r) * LOG_2PI)
    Kinv = linalg.cho_solve((L, True), np.eye(len(r)))
    W = np.outer(alpha, alpha) - Kinv
    grad = np.array([0.5 * np.sum(W * D) for D in dK])
    return ll, grad


@dataclass(frozen=True)
class GPPosterior:
    """A zero-mean GP conditioned on exact observations."""

    X: np.ndarray
    f: np.ndarray
    kernel: KernelSpec
    chol: np.ndarray
    alpha: np.ndarray

    def predict(self, X_new) -> tuple[np.ndarray, np.ndarray]:
        return gp_predict(self, X_new)


def gp_fit(X, f, spec: KernelSpec) -> GPPosterior:
    X = as_design(X, spec.dim)
    f = np.asarray(f, dtype=float).ravel()
    if len(f) != len(X) or len(f) < 1:
        raise InputError(f"need |X| = |f| >= 1, got {len(X)} and {len(f)}")
    L, _ = cholesky(cov(spec, X), spec.nugget)
    alpha = linalg.cho_solve((L, True), f)
    return GPPosterior(X, f, spec, L, alpha)


def gp_predict(post: GPPosterior, X_new) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at each row of ``X_new``."""
    X_new = as_design(X_new, post.kernel.dim)
    Ks = cov(post.kernel, post.X, X_new)
    mean = Ks.T @ post.alpha
    v = linalg.solve_triangular(post.chol, Ks, lower=True)
    prior = post.kernel.variance + post.kernel.nugget
    var = np.maximum(prior - np.sum(v * v, axis=0), 0.0)
    return mean, var


def conditional_operator(spec: KernelSpec, X, X_new) -> tuple[np.ndarray, np.ndarray]:
    """Matrix ``A`` and variances ``v`` with ``E[f(X_new) | f(X)] = A f(X)``.

    Used when the conditioning values change across MCMC states while the
    design stays fixed.
    """
    X = as_design(X, spec.dim)
    X_new = as_design(X_new, spec.dim)
    if len(X) == 0:
        return np.zeros((len(X_new), 0)), np.full(len(X_new), spec.variance + spec.nugget)
    L, _ = cholesky(cov(spec, X), spec.nugget)
    Ks = cov(spec, X, X_new)
    A = linalg.cho_solve((L, True), Ks).T
    v = linalg.solve_triangular(L, Ks, lower=True)
    var = np.maximum(spec.variance + spec.nugget - np.sum(v * v, axis=0), 0.0)
    return A, var
