"""Truncated normal and two-component truncated-normal mixture sampling.

Inverse-CDF sampling is used while the truncation point lies within
``TAIL_CUTOFF`` standard deviations on the plus side of the mean; beyond that
the draw comes from exponential-proposal rejection (Robert, 1995), which
stays exact where the survival function underflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

TAIL_CUTOFF = 6.0
NONNEG = "non-negative"
NONPOS = "non-positive"

_MASK64 = (1 << 64) - 1
_U_EPS = 2.0**-54


def _check_side(side: str) -> str:
    if side not in (NONNEG, NONPOS):
        raise ValueError(f"side must be {NONNEG!r} or {NONPOS!r}, got {side!r}")
    return side


def _tail_rate(a):
    return 0.5 * (a + np.sqrt(a * a + 4.0))


def _std_lower_tail(a: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draws of Z ~ N(0, 1) conditioned on Z >= a, vectorized over ``a``."""
    a = np.asarray(a, dtype=float)
    out = np.empty_like(a)
    inv = a <= TAIL_CUTOFF
    if np.any(inv):
        u = 1.0 - rng.random(np.count_nonzero(inv))  # (0, 1]
        u = np.clip(u, _U_EPS, 1.0 - _U_EPS)
        out[inv] = -special.ndtri(u * special.ndtr(-a[inv]))
    todo = np.flatnonzero(~inv)
    while todo.size:
        at = a[todo]
        lam = _tail_rate(at)
        z = at + rng.standard_exponential(todo.size) / lam
        accept = rng.random(todo.size) <= np.exp(-0.5 * (z - lam) ** 2)
        out[todo[accept]] = z[accept]
        todo = todo[~accept]
    return np.maximum(out, a)


def sample_trunc_normal(mu, var, side: str, rng: np.random.Generator, size=None):
    """Sample N(mu, var) restricted to the non-negative or non-positive half-line."""
    _check_side(side)
    if np.any(np.asarray(var) <= 0):
        raise ValueError("variance must be positive")
    mu_b, sd_b = np.broadcast_arrays(np.asarray(mu, float), np.sqrt(np.asarray(var, float)))
    shape = mu_b.shape if size is None else (size if np.ndim(size) else (size,))
    mu_b = np.broadcast_to(mu_b, shape)
    sd_b = np.broadcast_to(sd_b, shape)
    sign = 1.0 if side == NONNEG else -1.0
    z = _std_lower_tail((-sign * mu_b / sd_b).ravel(), rng).reshape(shape)
    x = sign * np.maximum(sign * mu_b + sd_b * z, 0.0)
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class NormalConditional:
    """Gaussian full conditional ``N(mean, var)``."""

    mean: float
    var: float

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * (x - self.mean) ** 2 / self.var) / np.sqrt(2 * np.pi * self.var)

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=float) - self.mean) / np.sqrt(self.var))


@dataclass(frozen=True)
class MixtureTruncNormal:
    """``weight * N+(mu_pos, var_pos) + (1 - weight) * N-(mu_neg, var_neg)``."""

    weight: float
    mu_pos: float
    var_pos: float
    mu_neg: float
    var_neg: float

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"mixture weight must lie in [0, 1], got {self.weight}")
        if not (self.var_pos > 0 and self.var_neg > 0):
            raise ValueError("component variances must be positive")

    def _parts(self):
        sp, sn = math.sqrt(self.var_pos), math.sqrt(self.var_neg)
        # log normalizers; ratios below stay exact where the normalizers underflow
        return sp, sn, special.log_ndtr(self.mu_pos / sp), special.log_ndtr(-self.mu_neg / sn)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        sp, sn, lzp, lzn = self._parts()
        out = np.zeros_like(x)
        if self.weight > 0:
            lp = stats.norm.logpdf(x, self.mu_pos, sp) - lzp
            out += self.weight * np.where(x >= 0, np.exp(lp), 0.0)
        if self.weight < 1:
            ln = stats.norm.logpdf(x, self.mu_neg, sn) - lzn
            out += (1.0 - self.weight) * np.where(x <= 0, np.exp(ln), 0.0)
        return out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        sp, sn, lzp, lzn = self._parts()
        out = np.zeros_like(x)
        if self.weight < 1:
            # P(X <= x | X <= 0) = Phi((x - mu) / sd) / Phi(-mu / sd)
            lneg = special.log_ndtr((np.minimum(x, 0.0) - self.mu_neg) / sn) - lzn
            out += (1.0 - self.weight) * np.where(x < 0, np.exp(lneg), 1.0)
        if self.weight > 0:
            # P(X <= x | X >= 0) = 1 - Phi((mu - x) / sd) / Phi(mu / sd), no cancellation in the tail
            lsurv = special.log_ndtr((self.mu_pos - np.maximum(x, 0.0)) / sp) - lzp
            out += self.weight * np.where(x > 0, -np.expm1(lsurv), 0.0)
        return np.clip(out, 0.0, 1.0)


def mixture_weight(mu_pos, sd_pos, mu_neg, sd_neg, log_evidence_ratio=0.0):
    """Weight on the non-negative component.

    ``log_evidence_ratio`` is the log ratio of the Gaussian normalizing
    constants of the positive and negative branches; with zero it reduces to
    ``Phi(mu+/sd+) / (Phi(-mu-/sd-) + Phi(mu+/sd+))``.
    """
    lp = special.log_ndtr(mu_pos / sd_pos) + log_evidence_ratio
    ln = special.log_ndtr(-mu_neg / sd_neg)
    return special.expit(lp - ln)


def sample_mixture_trunc_normal(m: MixtureTruncNormal, rng: np.random.Generator, size=None):
    n = 1 if size is None else int(size)
    pos = rng.random(n) < m.weight
    out = np.empty(n)
    if np.any(pos):
        out[pos] = sample_trunc_normal(m.mu_pos, m.var_pos, NONNEG, rng, size=int(pos.sum()))
    if np.any(~pos):
        out[~pos] = sample_trunc_normal(m.mu_neg, m.var_neg, NONPOS, rng, size=int((~pos).sum()))
    return float(out[0]) if size is None else out


# ---------------------------------------------------------------------------
# Scalar uniform-driven variants shared with the compiled sweep kernel. The
# rejection branch draws from a splitmix64 stream seeded per call, so both
# backends consume randomness identically.

def splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def _u01(bits: int) -> float:
    return ((bits >> 11) + 0.5) * 2.0**-53


def std_lower_tail_scalar(a: float, u: float, seed: int) -> float:
    """Deterministic draw of Z | Z >= a from a uniform ``u`` and a tail seed."""
    if a <= TAIL_CUTOFF:
        u = min(max(u, _U_EPS), 1.0 - _U_EPS)
        z = -special.ndtri(u * special.ndtr(-a))
        return z if z > a else a
    lam = 0.5 * (a + math.sqrt(a * a + 4.0))
    state = seed
    while True:
        state, b1 = splitmix64(state)
        state, b2 = splitmix64(state)
        z = a - math.log(_u01(b1)) / lam
        if _u01(b2) <= math.exp(-0.5 * (z - lam) ** 2):
            return z
