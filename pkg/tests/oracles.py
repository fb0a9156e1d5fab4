"""Independent brute-force oracles shared by the test modules.

Nothing here reuses the leave-one-out or precision-update code paths of the
package: joint densities are assembled from plain Cholesky factors of the
prior covariances and normalized numerically on a grid.
"""

import numpy as np
from scipy import integrate, linalg

from lolgp.core.kernels import cov
from lolgp.data import match_rows
from lolgp.state import activate


class GaussTerm:
    """log N(r; 0, K) evaluated for a batch of residual rows."""

    def __init__(self, K):
        self.L = linalg.cholesky(K, lower=True)
        self.logdet = 2.0 * np.sum(np.log(np.diag(self.L)))

    def __call__(self, R):
        R = np.atleast_2d(R)
        A = linalg.solve_triangular(self.L, R.T, lower=True)
        return -0.5 * np.sum(A * A, axis=0) - 0.5 * self.logdet - 0.5 * R.shape[1] * np.log(2 * np.pi)


def ms_log_joint(data, hp, activation):
    """Vectorized log [data, omega, f] of the multi-source model over flat states.

    Flat layout: omega_1..omega_L then f_1..f_L, each of length n_T.
    """
    XT, fT = data.target
    n, L = len(XT), data.n_sources
    F = [GaussTerm(cov(hp.f[l], np.vstack([X, XT]))) for l, (X, _) in enumerate(data.sources)]
    W = [GaussTerm(cov(hp.omega[l], XT)) for l in range(L)]
    D = GaussTerm(cov(hp.delta[0], XT))

    def logp(V):
        V = np.atleast_2d(V)
        out = np.zeros(len(V))
        resid = np.broadcast_to(fT, (len(V), n)).copy()
        for l, (X, fl) in enumerate(data.sources):
            w = V[:, l * n:(l + 1) * n]
            f = V[:, (L + l) * n:(L + l + 1) * n]
            out += F[l](np.hstack([np.broadcast_to(fl, (len(V), len(fl))), f]))
            out += W[l](w)
            resid -= activate(w, activation) * f
        return out + D(resid)

    return logp


def mf_log_joint(data, hp, activation, lay):
    """Vectorized log joint of the multi-fidelity model over flat engine states."""
    T = lay.n_steps
    F0 = GaussTerm(cov(hp.f[0], lay.aug[0]))
    W = [GaussTerm(cov(hp.omega[t], lay.aug[t + 1])) for t in range(T)]
    D = [GaussTerm(cov(hp.delta[t], lay.aug[t + 1])) for t in range(T)]

    def logp(V):
        V = np.atleast_2d(V)
        fv = [V[:, lay.f_off[l]:lay.f_off[l] + len(lay.aug[l])] for l in range(T + 1)]
        out = F0(fv[0])
        for t in range(T):
            w = V[:, lay.w_off[t]:lay.w_off[t] + len(lay.aug[t + 1])]
            out += W[t](w)
            out += D[t](fv[t + 1] - activate(w, activation) * fv[t][:, lay.down[t]])
        return out

    return logp


def grid_cdf(logp, base, index, n_grid=20001, span=60.0):
    """Numerically normalized CDF of coordinate ``index`` of ``base`` under ``logp``.

    A coarse pass finds where the density is non-negligible, then a fine
    trapezoidal pass normalizes it.
    """
    def along(g):
        V = np.tile(base, (len(g), 1))
        V[:, index] = g
        return logp(V)

    g = np.linspace(base[index] - span, base[index] + span, n_grid)
    lp = along(g)
    keep = g[lp > lp.max() - 45.0]
    step = g[1] - g[0]
    g = np.linspace(keep.min() - 2 * step, keep.max() + 2 * step, n_grid)
    lp = along(g)
    p = np.exp(lp - lp.max())
    c = integrate.cumulative_trapezoid(p, g, initial=0.0)
    return g, c / c[-1]


def mf_dense_cov(data, hp, rho):
    """Prior covariance of every level's outputs on nested designs, given the weights.

    ``rho[t]`` holds the transfer weights at ``X_{t+1}``. Built by propagating
    ``f_{t+1} = diag(rho_t) S_t f_t + delta_t`` with row-selection ``S_t``.
    """
    levels = data.levels
    n = len(levels)
    blocks = [[None] * n for _ in range(n)]
    blocks[0][0] = cov(hp.f[0], levels[0][0])
    for t in range(n - 1):
        X1, X0 = levels[t + 1][0], levels[t][0]
        S = np.zeros((len(X1), len(X0)))
        S[np.arange(len(X1)), match_rows(X1, X0)] = 1.0
        M = np.diag(rho[t]) @ S
        for m in range(t + 1):
            blocks[t + 1][m] = M @ blocks[t][m]
            blocks[m][t + 1] = blocks[t + 1][m].T
        blocks[t + 1][t + 1] = M @ blocks[t][t] @ M.T + cov(hp.delta[t], X1)
    return np.block(blocks)


def dense_gauss_logpdf(r, K):
    """log N(r; 0, K) through an explicit inverse and determinant."""
    sign, logdet = np.linalg.slogdet(K)
    assert sign > 0
    return float(-0.5 * r @ np.linalg.inv(K) @ r - 0.5 * logdet - 0.5 * len(r) * np.log(2 * np.pi))
