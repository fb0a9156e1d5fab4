"""Gibbs sweep engine with compiled/pure-Python backend selection.

The compiled kernel is used when importable unless ``LOLGP_BACKEND=python``.
Randomness is pre-drawn in fixed-size blocks from a numpy ``Generator`` so
both backends consume identical streams.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import _sweep_py
from .kernels import NumericalError
from .truncnorm import MixtureTruncNormal, NormalConditional, mixture_weight

try:
    from . import _sweep as _sweep_c
except ImportError:  # pragma: no cover - exercised only without a compiler
    _sweep_c = None

OMEGA, FVAL, ELLIPTICAL = _sweep_py.OMEGA, _sweep_py.FVAL, _sweep_py.ELLIPTICAL
RELU, IDENTITY = _sweep_py.RELU, _sweep_py.IDENTITY
BLOCK = 256

BACKENDS = {"python": _sweep_py.run_sweeps}
if _sweep_c is not None:
    BACKENDS["compiled"] = _sweep_c.run_sweeps


def default_backend() -> str:
    want = os.environ.get("LOLGP_BACKEND", "").lower()
    if want in BACKENDS:
        return want
    return "compiled" if "compiled" in BACKENDS else "python"


@dataclass
class GaussianFactor:
    """A residual vector with a zero-mean Gaussian prior given by its precision."""

    name: str
    precision: np.ndarray
    residual: np.ndarray


@dataclass
class SweepEngine:
    """Flattened Gibbs state plus the ordered list of coordinate updates."""

    vals: np.ndarray
    factors: list[GaussianFactor]
    steps: np.ndarray
    record: np.ndarray
    activation: int = RELU
    btab: np.ndarray = field(default_factory=lambda: np.zeros((0, 4), dtype=np.int64))
    chol: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def add_block_moves(self) -> int:
        """Append one elliptical slice step per latent-weight factor.

        Every single-site weight step that shares a prior factor joins one
        block, which is then moved jointly under that factor's Gaussian prior
        once per sweep. The single-site steps are kept, so the sweep remains a
        composition of kernels that each leave the posterior invariant.
        Returns the number of blocks added.
        """
        groups: dict[int, list] = {}
        for kind, vi, oi, gp, jp, gd, jd in self.steps.tolist():
            if kind == OMEGA:
                groups.setdefault(gp, []).append((vi, oi, jp, jd, gd))
        if not groups:
            return 0
        rows, chols, new_steps = list(self.btab), [self.chol], []
        b0, loff = len(self.btab), len(self.chol)
        for gp, members in groups.items():
            gds = {m[4] for m in members}
            if len(gds) != 1:
                raise ValueError("a latent-weight block must enter a single discrepancy factor")
            F = self.factors[gp]
            if not np.allclose(F.residual, self.vals[[m[0] for m in members]]) or len(members) != len(F.residual):
                raise ValueError(f"factor {F.name!r} is not a zero-mean prior on exactly its block")
            order = sorted(members, key=lambda m: m[2])
            nb = len(order)
            S = np.linalg.inv(F.precision)
            S = 0.5 * (S + S.T)
            jitter = 0.0
            for _ in range(8):
                try:
                    Lk = np.linalg.cholesky(S + jitter * np.eye(nb))
                    break
                except np.linalg.LinAlgError:
                    jitter = max(1e-12, 10.0 * jitter) * float(np.mean(np.diag(S)) or 1.0)
            else:
                raise NumericalError(f"prior covariance of {F.name!r} is not positive definite")
            rows.extend((m[0], m[1], m[2], m[3]) for m in order)
            chols.append(Lk.ravel())
            new_steps.append((ELLIPTICAL, b0, nb, gp, loff, gds.pop(), 0))
            b0 += nb
            loff += nb * nb
        self.btab = np.array(rows, dtype=np.int64).reshape(-1, 4)
        self.chol = np.concatenate(chols)
        self.steps = np.vstack([np.asarray(self.steps, dtype=np.int64).reshape(-1, 7),
                                np.array(new_steps, dtype=np.int64)])
        return len(new_steps)

    def _flatten(self):
        nf = np.array([len(g.residual) for g in self.factors], dtype=np.int64)
        roff = np.concatenate([[0], np.cumsum(nf)[:-1]]).astype(np.int64)
        qoff = np.concatenate([[0], np.cumsum(nf**2)[:-1]]).astype(np.int64)
        Q = np.concatenate([g.precision.ravel() for g in self.factors]) if self.factors else np.zeros(0)
        r = np.concatenate([g.residual for g in self.factors]) if self.factors else np.zeros(0)
        return dict(Q=np.ascontiguousarray(Q, dtype=float), qoff=qoff,
                    r=np.ascontiguousarray(r, dtype=float), roff=roff, nf=nf)

    def conditional(self, s: int):
        """Analytic full conditional targeted by step ``s`` at the current state.

        Returns a :class:`MixtureTruncNormal` for a latent weight under ReLU
        and a :class:`NormalConditional` otherwise.
        """
        kind, vi, oi, gp, jp, gd, jd = (int(v) for v in self.steps[s])
        if kind == ELLIPTICAL:
            raise ValueError(f"step {s} is a block move and has no single-site conditional")
        P, R = self.factors[gp], self.factors[gd]
        s2p = 1.0 / P.precision[jp, jp]
        mp = P.residual[jp] - P.precision[jp] @ P.residual * s2p + (self.vals[vi] - P.residual[jp])
        s2d = 1.0 / R.precision[jd, jd]
        md = R.residual[jd] - R.precision[jd] @ R.residual * s2d
        relu = self.activation == RELU
        if kind == OMEGA:
            w, f = self.vals[vi], self.vals[oi]
            rho = w if (not relu or w > 0) else 0.0
            y = R.residual[jd] + f * rho - md
            var_pos = 1.0 / (1.0 / s2p + f * f / s2d)
            mu_pos = var_pos * (mp / s2p + f * y / s2d)
            if not relu:
                return NormalConditional(mu_pos, var_pos)
            lr = _sweep_py._lognorm(y, mp * f, s2d + f * f * s2p) - _sweep_py._lognorm(y, 0.0, s2d)
            pi = mixture_weight(mu_pos, np.sqrt(var_pos), mp, np.sqrt(s2p), lr)
            return MixtureTruncNormal(float(pi), mu_pos, var_pos, mp, s2p)
        f, w = self.vals[vi], self.vals[oi]
        rho = w if (not relu or w > 0) else 0.0
        y = R.residual[jd] + rho * f - md
        prec = 1.0 / s2p + rho * rho / s2d
        return NormalConditional((mp / s2p + rho * y / s2d) / prec, 1.0 / prec)

    def run(self, n_iter: int, rng: np.random.Generator, backend: str | None = None) -> np.ndarray:
        """Run ``n_iter`` sweeps and return the recorded values, one row per sweep."""
        kernel = BACKENDS[backend or default_backend()]
        flat = self._flatten()
        vals = np.ascontiguousarray(self.vals, dtype=float).copy()
        steps = np.ascontiguousarray(self.steps, dtype=np.int64).reshape(-1, 7)
        rec = np.ascontiguousarray(self.record, dtype=np.int64)
        n_steps = len(steps)
        out = np.empty((n_iter, len(rec)))
        btab = np.ascontiguousarray(self.btab, dtype=np.int64).reshape(-1, 4)
        chol = np.ascontiguousarray(self.chol, dtype=float)
        blocks = steps[steps[:, 0] == ELLIPTICAL]
        width = 0
        for _, _, nb_, _, _, gd_, _ in blocks.tolist():
            width = max(width, 3 * nb_ + 2 * len(self.factors[gd_].residual))
        work = np.zeros(max(width, 1))
        done = 0
        while done < n_iter:
            nb = min(BLOCK, n_iter - done)
            U = rng.random((nb, n_steps, 2))
            Z = rng.standard_normal((nb, n_steps))
            seeds = rng.integers(0, 2**63, size=(nb, n_steps), dtype=np.uint64)
            block = np.empty((nb, len(rec)))
            bad = kernel(vals, flat["Q"], flat["qoff"], flat["r"], flat["roff"], flat["nf"],
                         steps, int(self.activation), U, Z, seeds, rec, block, btab, chol, work)
            if bad >= 0:
                raise NumericalError(
                    f"Gibbs chain produced non-finite values at iteration {done + bad}; "
                    f"state dump: {vals[rec].tolist()}")
            out[done:done + nb] = block
            done += nb
        self.vals = vals
        for g, o, n in zip(self.factors, flat["roff"], flat["nf"]):
            g.residual = flat["r"][o:o + n].copy()
        return out
