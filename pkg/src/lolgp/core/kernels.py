"""Anisotropic squared-exponential kernel.

The kernel is parameterized by lengthscales rather than inverse lengthscales::

    k(x, x') = variance * exp(-sum_j (x_j - x'_j)**2 / lengthscale_j**2)
               + nugget * [x == x']

The nugget is added only when two points coincide exactly, so a covariance
matrix over distinct design points carries it on the diagonal and cross
covariances between distinct points never see it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_NUGGET = 1e-8


class InputError(ValueError):
    """Raised for malformed or inconsistent inputs."""


class NumericalError(RuntimeError):
    """Raised when a covariance cannot be factorized even after jitter."""


@dataclass(frozen=True)
class KernelSpec:
    """Hyperparameters of one squared-exponential kernel.

    Parameters
    ----------
    variance : float
        Process variance, must be positive.
    lengthscales : sequence of float
        One positive lengthscale per input dimension.
    nugget : float
        Non-negative diagonal jitter.
    """

    variance: float
    lengthscales: tuple[float, ...]
    nugget: float = DEFAULT_NUGGET
    _ls: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "variance", float(self.variance))
        object.__setattr__(self, "nugget", float(self.nugget))
        if not self.variance >= 0 or not np.isfinite(self.variance):
            raise InputError(f"kernel variance must be non-negative, got {self.variance}")
        if len(ls) == 0 or not all(v > 0 and np.isfinite(v) for v in ls):
            raise InputError(f"lengthscales must be positive, got {ls}")
        if not self.nugget >= 0:
            raise InputError(f"nugget must be non-negative, got {self.nugget}")
        object.__setattr__(self, "_ls", np.asarray(ls))

    @property
    def dim(self) -> int:
        return len(self.lengthscales)

    @classmethod
    def isotropic(cls, dim: int, variance: float = 1.0, lengthscale: float = 0.5,
                  nugget: float = DEFAULT_NUGGET) -> "KernelSpec":
        return cls(variance, (lengthscale,) * dim, nugget)

    # log-space parameter vector: [log variance, log lengthscale_1..d]
    def to_log(self) -> np.ndarray:
        return np.concatenate([[np.log(self.variance)], np.log(self._ls)])

    def with_log(self, theta) -> "KernelSpec":
        theta = np.asarray(theta, dtype=float)
        return KernelSpec(float(np.exp(theta[0])), tuple(np.exp(theta[1:])), self.nugget)

    def to_dict(self) -> dict:
        return {"variance": self.variance, "lengthscales": list(self.lengthscales),
                "nugget": self.nugget}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(d["variance"], tuple(d["lengthscales"]), d.get("nugget", DEFAULT_NUGGET))


def as_design(X, dim: int | None = None) -> np.ndarray:
    """Coerce ``X`` to a finite 2-d float array of shape (n, d)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if dim in (None, 1) else X[None, :]
    if X.ndim != 2:
        raise InputError(f"design must be 2-d, got shape {X.shape}")
    if dim is not None and X.shape[1] != dim:
        raise InputError(f"dimension mismatch: expected {dim} columns, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise InputError("design contains non-finite entries")
    return X


def _sqdist_terms(spec: KernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    # exact per-dimension differences so that coincident points give 0 exactly
    diff = X[:, None, :] - Y[None, :, :]
    return diff * diff


def kernel_eval(spec: KernelSpec, x, x2) -> float:
    """Evaluate the kernel at a single pair of points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != (spec.dim,) or x2.shape != (spec.dim,):
        raise InputError(
            f"dimension mismatch: kernel has d={spec.dim}, points have {x.shape} and {x2.shape}")
    d2 = (x - x2) ** 2
    val = spec.variance * np.exp(-np.sum(d2 / spec._ls**2))
    if np.all(d2 == 0.0):
        val += spec.nugget
    return float(val)


def cov(spec: KernelSpec, X, Y=None) -> np.ndarray:
    """Covariance matrix ``K(X, Y)``; ``Y`` defaults to ``X``."""
    X = as_design(X, spec.dim)
    Y = X if Y is None else as_design(Y, spec.dim)
    d2 = _sqdist_terms(spec, X, Y)
    K = spec.variance * np.exp(-np.sum(d2 / spec._ls**2, axis=2))
    if spec.nugget > 0:
        K = K + spec.nugget * np.all(d2 == 0.0, axis=2)
    return K


def cov_diag(spec: KernelSpec, n: int) -> np.ndarray:
    """Prior variances at ``n`` points (each point coincides with itself)."""
    return np.full(n, spec.variance + spec.nugget)


def cov_with_grad(spec: KernelSpec, X) -> tuple[np.ndarray, list[np.ndarray]]:
    """Self-covariance ``K(X, X)`` and its derivatives w.r.t. ``spec.to_log()``.

    The nugget is held fixed, so it does not enter any derivative.
    """
    X = as_design(X, spec.dim)
    d2 = _sqdist_terms(spec, X, X)
    scaled = d2 / spec._ls**2
    K_se = spec.variance * np.exp(-np.sum(scaled, axis=2))
    K = K_se + spec.nugget * np.eye(len(X))
    grads = [K_se]
    for j in range(spec.dim):
        # d/d log(l_j) of exp(-d^2/l^2) = 2 d^2/l^2 * exp(...)
        grads.append(K_se * (2.0 * scaled[:, :, j]))
    return K, grads
