"""Predictive distributions returned by every surrogate."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import stats

from .data import Standardizer
from .metrics import crps_empirical, crps_gaussian


@dataclass(frozen=True)
class PredictiveSamples:
    """Monte Carlo predictive draws, shape ``(n_draws, n_test)``."""

    draws: np.ndarray

    @property
    def n_test(self) -> int:
        return self.draws.shape[1]

    @cached_property
    def mean(self) -> np.ndarray:
        return self.draws.mean(axis=0)

    @cached_property
    def var(self) -> np.ndarray:
        return self.draws.var(axis=0, ddof=1) if len(self.draws) > 1 else np.zeros(self.n_test)

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(self.var)

    def quantile(self, q) -> np.ndarray:
        return np.quantile(self.draws, q, axis=0)

    def interval(self, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
        a = 0.5 * (1.0 - level)
        lo, hi = self.quantile([a, 1.0 - a])
        return lo, hi

    def mc_stderr(self) -> np.ndarray:
        """Naive Monte Carlo standard error of the mean (draws treated as independent)."""
        return self.sd / np.sqrt(len(self.draws))

    def crps(self, truth) -> np.ndarray:
        truth = np.asarray(truth, dtype=float)
        return np.array([crps_empirical(self.draws[:, j], truth[j]) for j in range(self.n_test)])

    def transformed(self, st: Standardizer) -> "PredictiveSamples":
        return PredictiveSamples(st.inverse(self.draws))


@dataclass(frozen=True)
class GaussianPrediction:
    """Closed-form Gaussian predictive marginals."""

    mean: np.ndarray
    var: np.ndarray

    @property
    def n_test(self) -> int:
        return len(self.mean)

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.var, 0.0))

    def quantile(self, q) -> np.ndarray:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        out = self.mean[None, :] + self.sd[None, :] * stats.norm.ppf(q)[:, None]
        return out if len(q) > 1 else out[0]

    def interval(self, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
        a = 0.5 * (1.0 - level)
        lo, hi = self.quantile([a, 1.0 - a])
        return lo, hi

    def crps(self, truth) -> np.ndarray:
        return crps_gaussian(self.mean, self.sd, np.asarray(truth, dtype=float))

    def transformed(self, st: Standardizer) -> "GaussianPrediction":
        return GaussianPrediction(st.inverse(self.mean), self.var * st.scale**2)
