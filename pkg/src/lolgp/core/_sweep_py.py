"""Pure-Python Gibbs sweep kernel (fallback for the compiled ``_sweep`` module).

State layout shared with the compiled kernel:

* ``vals``: every scalar the sweep touches (latent weights, latent function
  values and observed function values).
* Gaussian factors ``g``: residual vector ``r[roff[g]:roff[g]+nf[g]]`` with
  zero-mean Gaussian prior whose precision is ``Q[qoff[g]:...]`` (row-major).
* ``steps[s] = (kind, var, other, gp, jp, gd, jd)``: update ``vals[var]``
  whose own prior factor is ``(gp, jp)`` (coefficient +1, so the residual is
  ``vals[var]`` plus terms that do not involve it) and which enters the
  discrepancy factor ``(gd, jd)`` with coefficient ``-act(w) * f``.
  For ``kind == 0`` ``var`` is a latent weight and ``other`` the function
  value it multiplies; for ``kind == 1`` the roles are swapped.
* ``kind == 2`` is an elliptical slice update of a whole latent-weight
  vector: ``(2, b0, nb, gp, loff, gd, 0)`` moves rows ``b0..b0+nb`` of
  ``btab`` (each ``(var, other, jp, jd)``) jointly under the prior factor
  ``gp``, whose covariance has lower Cholesky factor
  ``Lc[loff:loff+nb*nb]``. Its uniforms and normals come from a splitmix64
  stream seeded with ``seeds[it, s]``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .truncnorm import _u01, mixture_weight, splitmix64, std_lower_tail_scalar

OMEGA, FVAL, ELLIPTICAL = 0, 1, 2
MAX_SHRINK = 200
RELU, IDENTITY = 0, 1
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _loo(Q, qoff, r, roff, n, j):
    q = Q[qoff + j * n: qoff + (j + 1) * n]
    s2 = 1.0 / q[j]
    m = r[roff + j] - float(np.dot(q, r[roff: roff + n])) * s2
    return m, s2


def _lognorm(y, m, v):
    return -0.5 * (y - m) ** 2 / v - 0.5 * math.log(v) - _HALF_LOG_2PI


def _act(w, activation):
    return w if activation == IDENTITY else np.maximum(w, 0.0)


def elliptical_update(vals, Q, qoff, r, roff, nf, btab, Lc, b0, nb, gp, loff, gd, activation, seed):
    """One elliptical slice move of a latent-weight block (state updated in place)."""
    rows = btab[b0:b0 + nb]
    vi, oi, jp, jd = rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3]
    nd, rd0 = nf[gd], roff[gd]
    Qd = Q[qoff[gd]: qoff[gd] + nd * nd].reshape(nd, nd)
    state = int(seed)
    z = np.empty(nb)
    for k in range(nb):
        state, bits = splitmix64(state)
        z[k] = special.ndtri(_u01(bits))
    nu = Lc[loff: loff + nb * nb].reshape(nb, nb) @ z
    w0 = vals[vi].copy()
    f = vals[oi]
    rr = r[rd0: rd0 + nd].copy()
    base = rr.copy()
    np.add.at(base, jd, f * _act(w0, activation))
    state, bits = splitmix64(state)
    logy = -0.5 * float(rr @ Qd @ rr) + math.log(_u01(bits))
    state, bits = splitmix64(state)
    theta = 2.0 * math.pi * _u01(bits)
    lo, hi = theta - 2.0 * math.pi, theta
    for _ in range(MAX_SHRINK):
        wp = w0 * math.cos(theta) + nu * math.sin(theta)
        rr = base.copy()
        np.subtract.at(rr, jd, f * _act(wp, activation))
        if -0.5 * float(rr @ Qd @ rr) > logy:
            vals[vi] = wp
            r[roff[gp] + jp] += wp - w0
            r[rd0: rd0 + nd] = rr
            return
        if theta < 0.0:
            lo = theta
        else:
            hi = theta
        state, bits = splitmix64(state)
        theta = lo + (hi - lo) * _u01(bits)


def run_sweeps(vals, Q, qoff, r, roff, nf, steps, activation, U, Z, seeds, rec_idx, out,
               btab=None, Lc=None, work=None):
    """Run ``len(U)`` sweeps in place; returns -1 or the first non-finite iteration."""
    n_iter, n_steps = Z.shape
    for it in range(n_iter):
        for s in range(n_steps):
            kind, vi, oi, gp, jp, gd, jd = steps[s]
            if kind == ELLIPTICAL:
                elliptical_update(vals, Q, qoff, r, roff, nf, btab, Lc, vi, oi, gp, jp, gd,
                                  activation, seeds[it, s])
                continue
            mp, s2p = _loo(Q, qoff[gp], r, roff[gp], nf[gp], jp)
            md, s2d = _loo(Q, qoff[gd], r, roff[gd], nf[gd], jd)
            # the prior residual is the variable plus a constant offset
            mp += vals[vi] - r[roff[gp] + jp]
            if kind == OMEGA:
                w = vals[vi]
                f = vals[oi]
                rho = w if (activation == IDENTITY or w > 0.0) else 0.0
                y = r[roff[gd] + jd] + f * rho - md
                var_pos = 1.0 / (1.0 / s2p + f * f / s2d)
                mu_pos = var_pos * (mp / s2p + f * y / s2d)
                if activation == IDENTITY:
                    w_new = mu_pos + math.sqrt(var_pos) * Z[it, s]
                else:
                    log_ratio = _lognorm(y, mp * f, s2d + f * f * s2p) - _lognorm(y, 0.0, s2d)
                    sd_pos, sd_neg = math.sqrt(var_pos), math.sqrt(s2p)
                    pi = mixture_weight(mu_pos, sd_pos, mp, sd_neg, log_ratio)
                    if U[it, s, 0] < pi:
                        z = std_lower_tail_scalar(-mu_pos / sd_pos, U[it, s, 1], int(seeds[it, s]))
                        w_new = max(mu_pos + sd_pos * z, 0.0)
                    else:
                        z = std_lower_tail_scalar(mp / sd_neg, U[it, s, 1], int(seeds[it, s]))
                        w_new = min(mp - sd_neg * z, 0.0)
                rho_new = w_new if (activation == IDENTITY or w_new > 0.0) else 0.0
                r[roff[gp] + jp] += w_new - w
                r[roff[gd] + jd] -= f * (rho_new - rho)
                vals[vi] = w_new
            else:
                f = vals[vi]
                w = vals[oi]
                rho = w if (activation == IDENTITY or w > 0.0) else 0.0
                y = r[roff[gd] + jd] + rho * f - md
                prec = 1.0 / s2p + rho * rho / s2d
                mean = (mp / s2p + rho * y / s2d) / prec
                f_new = mean + Z[it, s] / math.sqrt(prec)
                r[roff[gp] + jp] += f_new - f
                r[roff[gd] + jd] -= rho * (f_new - f)
                vals[vi] = f_new
        row = vals[rec_idx]
        if not np.all(np.isfinite(row)):
            return it
        out[it, :] = row
    return -1
