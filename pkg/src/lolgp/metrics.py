"""Prediction metrics (RMSE, CRPS) and MCMC chain diagnostics (ESS, split-half drift)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .core.kernels import InputError


def rmse(predictions, truths) -> float:
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(truths, dtype=float).ravel()
    if len(p) != len(t) or len(p) < 1:
        raise InputError(f"rmse needs equal non-empty lengths, got {len(p)} and {len(t)}")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def crps_empirical(draws, truth: float) -> float:
    """CRPS of the empirical distribution of ``draws`` at ``truth``.

    Computed as ``E|Y - y| - E|Y - Y'| / 2`` with both expectations over the
    empirical distribution (all ordered pairs, including ``Y = Y'``), which is
    exactly the integral of the squared CDF difference for a step CDF. The
    pairwise term uses the sorted-order identity, so cost is O(n log n).
    """
    y = np.sort(np.asarray(draws, dtype=float).ravel())
    n = len(y)
    if n < 2:
        raise InputError("crps_empirical needs at least 2 draws")
    t = float(truth)
    term1 = np.mean(np.abs(y - t))
    # sum_{i,j} |y_i - y_j| = 2 * sum_i (2i - n - 1) y_(i), 1-based i
    w = 2.0 * np.arange(1, n + 1) - n - 1
    pair = 2.0 * np.dot(w, y) / (n * n)
    return float(max(term1 - 0.5 * pair, 0.0))


def crps_gaussian(mean, sd, truth) -> np.ndarray:
    """Closed-form CRPS of N(mean, sd^2); degenerate ``sd == 0`` gives |mean - truth|."""
    mean, sd, truth = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (mean, sd, truth)))
    out = np.array(np.abs(mean - truth), dtype=float)
    pos = sd > 0
    z = (truth[pos] - mean[pos]) / sd[pos]
    out[pos] = sd[pos] * (z * (2 * stats.norm.cdf(z) - 1) + 2 * stats.norm.pdf(z) - 1 / np.sqrt(np.pi))
    return out


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    crps: float
    n_test: int
    sq_errors: np.ndarray = field(repr=False)
    crps_points: np.ndarray = field(repr=False)
    coverage95: float = float("nan")


def evaluate(prediction, truths) -> MetricReport:
    """RMSE of the predictive mean and mean CRPS of the predictive distribution."""
    truths = np.asarray(truths, dtype=float).ravel()
    mean = np.asarray(prediction.mean)
    cr = np.asarray(prediction.crps(truths))
    lo, hi = prediction.interval(0.95)
    cover = float(np.mean((truths >= lo) & (truths <= hi)))
    return MetricReport(rmse(mean, truths), float(np.mean(cr)), len(truths),
                        (mean - truths) ** 2, cr, cover)


@dataclass(frozen=True)
class EssResult:
    ess: float
    capped: bool = False
    degenerate: bool = False


def _autocorr(x: np.ndarray) -> np.ndarray:
    n = len(x)
    xc = x - x.mean()
    m = 1 << (2 * n - 1).bit_length()
    fx = np.fft.rfft(xc, m)
    acov = np.fft.irfft(fx * np.conj(fx), m)[:n] / n
    return acov / acov[0]


def ess(chain, min_length: int = 100) -> EssResult:
    """Effective sample size with Geyer's initial monotone sequence truncation."""
    x = np.asarray(chain, dtype=float).ravel()
    n = len(x)
    if n < min_length:
        raise InputError(f"ess needs a chain of length >= {min_length}, got {n}")
    if np.ptp(x) == 0 or not np.var(x) > 0:
        return EssResult(float(n), capped=True, degenerate=True)
    rho = _autocorr(x)
    n_pairs = n // 2
    gamma = rho[0:2 * n_pairs:2] + rho[1:2 * n_pairs:2]
    tau_sum = 0.0
    prev = np.inf
    for m, g in enumerate(gamma):
        if m > 0 and g <= 0:
            break
        g = min(g, prev)
        tau_sum += g
        prev = g
    tau = -1.0 + 2.0 * tau_sum
    if tau <= 1.0 / n or n / tau > n:
        return EssResult(float(n), capped=True)
    return EssResult(float(n / tau))


@dataclass(frozen=True)
class ChainDiagnostics:
    ess: dict
    split_half_z: dict

    @property
    def ess_min(self) -> float:
        return float(min(v.ess for v in self.ess.values())) if self.ess else float("nan")


def split_half_z(chain) -> float:
    """Difference of first/second-half means in units of its ESS-based standard error."""
    x = np.asarray(chain, dtype=float).ravel()
    a, b = x[: len(x) // 2], x[len(x) // 2:]
    se2 = 0.0
    for h in (a, b):
        if np.var(h) > 0:
            se2 += np.var(h, ddof=1) / ess(h, min_length=2).ess
    return float(abs(a.mean() - b.mean()) / np.sqrt(se2)) if se2 > 0 else 0.0


def diagnose(samples: np.ndarray, names=None) -> ChainDiagnostics:
    """ESS and split-half drift for each column of ``samples``."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    names = names or [f"x{j}" for j in range(samples.shape[1])]
    e = {nm: ess(samples[:, j]) for j, nm in enumerate(names)}
    z = {nm: split_half_z(samples[:, j]) for j, nm in enumerate(names)}
    return ChainDiagnostics(e, z)
