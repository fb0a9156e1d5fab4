"""Multi-source LOL-GP: latent-state Gibbs sampler and posterior predictive sampling.

Model on the target system::

    f_T(x) = sum_l rho_l(x) f_l(x) + delta(x),   rho_l = act(omega_l)

with independent zero-mean GP priors on every ``f_l``, ``omega_l`` and
``delta``. The latent state holds ``omega_l`` and ``f_l`` at the target
design. Every full conditional is computed from leave-one-out moments of
three kinds of Gaussian factor: the source GP over ``[X_l; X_T]``, the
latent-weight GP over ``X_T`` and the discrepancy GP over ``X_T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core.gp import conditional_operator, gp_fit, gp_predict, precision
from .core.kernels import InputError, KernelSpec, cov
from .core.sweep import FVAL, OMEGA, GaussianFactor, SweepEngine
from .core.truncnorm import MixtureTruncNormal, NormalConditional, mixture_weight
from .data import MultiSourceData
from .params import HyperParams
from .predictive import PredictiveSamples
from .state import ACTIVATIONS, Chain, LatentState, LOLGPConfig, activate, rng_stream

CHUNK = 128
CHAIN_STREAM, PREDICT_STREAM = 0, 1


def omega_is_degenerate(spec: KernelSpec) -> bool:
    """A latent-weight kernel with no variance pins the weights at 0."""
    return spec.variance + spec.nugget == 0.0


def frozen_omega(hp: HyperParams, config: LOLGPConfig) -> tuple[float | None, ...]:
    """Constant value of each step's latent weight, or ``None`` when it is sampled."""
    out = []
    for k in hp.omega:
        if config.fixed_omega is not None:
            out.append(float(config.fixed_omega))
        elif omega_is_degenerate(k):
            out.append(0.0)
        else:
            out.append(None)
    return tuple(out)


def _check_ms(data: MultiSourceData, hp: HyperParams):
    if len(hp.f) != data.n_sources or len(hp.omega) != data.n_sources or len(hp.delta) != 1:
        raise InputError(
            f"hyperparameters describe {len(hp.f)} sources but the data has {data.n_sources}")


def initial_state_ms(data: MultiSourceData, hp: HyperParams, config: LOLGPConfig) -> LatentState:
    """Latent weights at ``init_omega`` and latent source values at their GP means."""
    XT = data.target[0]
    fixed = frozen_omega(hp, config)
    omega, f = [], []
    for l, (X, fl) in enumerate(data.sources):
        w0 = config.init_omega if fixed[l] is None else fixed[l]
        omega.append(np.full(len(XT), float(w0)))
        f.append(gp_predict(gp_fit(X, fl, hp.f[l]), XT)[0] if len(X) else np.zeros(len(XT)))
    return LatentState(tuple(omega), tuple(f))


@dataclass
class MSLayout:
    """Positions of every latent coordinate inside the flat sweep state."""

    n_target: int
    n_sources: int

    def omega(self, l: int, i: int) -> int:
        return l * self.n_target + i

    def f(self, l: int, i: int) -> int:
        return (self.n_sources + l) * self.n_target + i

    def unpack(self, vals: np.ndarray) -> LatentState:
        n, L = self.n_target, self.n_sources
        return LatentState(tuple(vals[l * n:(l + 1) * n] for l in range(L)),
                           tuple(vals[(L + l) * n:(L + l + 1) * n] for l in range(L)))


def build_engine_ms(data: MultiSourceData, hp: HyperParams, config: LOLGPConfig,
                    state: LatentState) -> tuple[SweepEngine, MSLayout]:
    """Sweep engine whose steps follow sources outer, target points inner, weight first."""
    _check_ms(data, hp)
    XT, fT = data.target
    n, L = len(XT), data.n_sources
    act = config.activation
    lay = MSLayout(n, L)
    fixed = frozen_omega(hp, config)
    vals = np.concatenate([*state.omega, *state.f]) if L else np.zeros(0)
    factors = []
    for l, (X, fl) in enumerate(data.sources):
        K = cov(hp.f[l], np.vstack([X, XT]))
        factors.append(GaussianFactor(f"f{l + 1}", precision(K, hp.f[l].nugget),
                                      np.concatenate([fl, state.f[l]])))
    for l in range(L):
        if fixed[l] is None:
            P = precision(cov(hp.omega[l], XT), hp.omega[l].nugget)
        else:
            P = np.eye(n)  # placeholder, never read
        factors.append(GaussianFactor(f"omega{l + 1}", P, state.omega[l].copy()))
    resid = fT - sum((activate(state.omega[l], act) * state.f[l] for l in range(L)), np.zeros(n))
    factors.append(GaussianFactor("delta", precision(cov(hp.delta[0], XT), hp.delta[0].nugget), resid))
    gd = 2 * L
    steps = []
    for l in range(L):
        nl = len(data.sources[l][0])
        for i in range(n):
            if fixed[l] is None:
                steps.append((OMEGA, lay.omega(l, i), lay.f(l, i), L + l, i, gd, i))
            steps.append((FVAL, lay.f(l, i), lay.omega(l, i), l, nl + i, gd, i))
    steps = np.array(steps, dtype=np.int64).reshape(-1, 7)
    engine = SweepEngine(vals, factors, steps, np.arange(len(vals)), ACTIVATIONS[act])
    if config.block_omega:
        engine.add_block_moves()
    return engine, lay


def _chain_from_rows(rows: np.ndarray, lay: MSLayout, config, fixed) -> Chain:
    n, L = lay.n_target, lay.n_sources
    return Chain(tuple(rows[:, l * n:(l + 1) * n] for l in range(L)),
                 tuple(rows[:, (L + l) * n:(L + l + 1) * n] for l in range(L)),
                 config.activation, fixed)


def run_engine(engine: SweepEngine, config: LOLGPConfig, rng: np.random.Generator) -> np.ndarray:
    """Burn-in followed by the kept sweeps; returns the kept rows."""
    if config.burn_in:
        engine.run(config.burn_in, rng, config.backend)
    return engine.run(config.n_kept, rng, config.backend)


def gibbs_sample_ms(data: MultiSourceData, hp: HyperParams, config: LOLGPConfig,
                    init: LatentState | None = None, stream: int = CHAIN_STREAM) -> Chain:
    """Gibbs chain over the latent state (kept states only).

    Leave-one-out moments come from precision matrices computed once before
    sampling and residual vectors updated in place after every draw.
    """
    state = init if init is not None else initial_state_ms(data, hp, config)
    engine, lay = build_engine_ms(data, hp, config, state)
    rows = run_engine(engine, config, rng_stream(config.seed, stream))
    return _chain_from_rows(rows, lay, config, frozen_omega(hp, config))


# -- reference full conditionals (direct submatrix algebra) -------------------

def _loo_dense(K: np.ndarray, v: np.ndarray, i: int) -> tuple[float, float]:
    """Moments of ``v_i`` given ``v_{-i}`` under ``N(0, K)``."""
    rest = np.delete(np.arange(len(v)), i)
    if len(rest) == 0:
        return 0.0, float(K[i, i])
    k = K[rest, i]
    sol = linalg.solve(K[np.ix_(rest, rest)], np.column_stack([v[rest], k]), assume_a="pos")
    return float(k @ sol[:, 0]), float(K[i, i] - k @ sol[:, 1])


def _delta_loo(data, hp, state, l, i, act):
    XT, fT = data.target
    e = fT - sum((activate(state.omega[m], act) * state.f[m]
                  for m in range(data.n_sources) if m != l), np.zeros(len(XT)))
    d = e - activate(state.omega[l], act) * state.f[l]
    md, s2d = _loo_dense(cov(hp.delta[0], XT), d, i)
    return float(e[i] - md), s2d


def full_conditional_omega(i: int, l: int, state: LatentState, data: MultiSourceData,
                           hp: HyperParams, activation: str = "relu"):
    """Full conditional of ``omega_l(x_i)``.

    Returns a :class:`MixtureTruncNormal` for the ReLU activation and a
    :class:`NormalConditional` for the identity activation. With
    ``e = f_T(x_i) - sum_{l' != l} rho_l' f_l'(x_i)`` and the leave-one-out
    discrepancy moments ``(m, s2)``, the weight enters the likelihood
    ``N(e - m; act(w) f, s2)``; on ``w > 0`` this is conjugate with the
    leave-one-out prior ``N(mu_-, sigma2_-)`` of the weight, and on ``w <= 0``
    the likelihood is flat in ``w`` so the prior is truncated unchanged.
    """
    _check_ms(data, hp)
    XT = data.target[0]
    mu_neg, var_neg = _loo_dense(cov(hp.omega[l], XT), state.omega[l], i)
    y, s2 = _delta_loo(data, hp, state, l, i, activation)
    f = float(state.f[l][i])
    var_pos = 1.0 / (1.0 / var_neg + f * f / s2)
    mu_pos = var_pos * (mu_neg / var_neg + f * y / s2)
    if activation == "identity":
        return NormalConditional(mu_pos, var_pos)
    # evidence of y under "w > 0" (slab) relative to "w <= 0" (rho = 0)
    log_ratio = (-0.5 * (y - mu_neg * f) ** 2 / (s2 + f * f * var_neg) - 0.5 * np.log(s2 + f * f * var_neg)
                 + 0.5 * y * y / s2 + 0.5 * np.log(s2))
    pi = mixture_weight(mu_pos, np.sqrt(var_pos), mu_neg, np.sqrt(var_neg), log_ratio)
    return MixtureTruncNormal(pi, mu_pos, var_pos, mu_neg, var_neg)


def full_conditional_flatent(i: int, l: int, state: LatentState, data: MultiSourceData,
                             hp: HyperParams, activation: str = "relu") -> NormalConditional:
    """Full conditional of the latent source value ``f_l(x_i)``.

    The prior part conditions on the source data and the other latent values
    of source ``l`` through the covariance over ``[X_l; X_T]``; the likelihood
    part is ``N(e - m; rho f, s2)`` from the discrepancy factor.
    """
    _check_ms(data, hp)
    X, fl = data.sources[l]
    XT = data.target[0]
    K = cov(hp.f[l], np.vstack([X, XT]))
    v = np.concatenate([fl, state.f[l]])
    mp, vp = _loo_dense(K, v, len(X) + i)
    y, s2 = _delta_loo(data, hp, state, l, i, activation)
    rho = float(activate(state.omega[l][i], activation))
    prec = 1.0 / vp + rho * rho / s2
    return NormalConditional((mp / vp + rho * y / s2) / prec, 1.0 / prec)


# -- posterior predictive ------------------------------------------------------

def predict_ms(data: MultiSourceData, hp: HyperParams, chain: Chain, X_test,
               seed: int = 0) -> PredictiveSamples:
    """One target draw per kept state at each test input.

    Per state: draw ``f_l(x)`` given ``f_l`` on ``[X_l; X_T]``, draw
    ``omega_l(x)`` given ``omega_l(X_T)``, then draw ``f_T(x)`` from the
    discrepancy GP conditioned on ``f_T - sum rho_l f_l`` at ``X_T``. Test
    points are processed in fixed chunks with one random stream per chunk.
    """
    _check_ms(data, hp)
    XT, fT = data.target
    X_test = np.asarray(X_test, dtype=float).reshape(-1, data.dim)
    L, S = data.n_sources, chain.n_kept
    act = chain.activation
    fixed = chain.frozen_omega or (None,) * L
    resid = np.broadcast_to(fT, (S, len(XT))).copy()
    for l in range(L):
        resid -= chain.rho(l) * chain.f[l]
    draws = np.empty((S, len(X_test)))
    for c, start in enumerate(range(0, len(X_test), CHUNK)):
        Xc = X_test[start:start + CHUNK]
        rng = rng_stream(seed, PREDICT_STREAM, c)
        m = len(Xc)
        out = np.zeros((S, m))
        for l, (X, fl) in enumerate(data.sources):
            A, v = conditional_operator(hp.f[l], np.vstack([X, XT]), Xc)
            fx = fl @ A[:, :len(X)].T + chain.f[l] @ A[:, len(X):].T
            fx += np.sqrt(v) * rng.standard_normal((S, m))
            if fixed[l] is None:
                Aw, vw = conditional_operator(hp.omega[l], XT, Xc)
                wx = chain.omega[l] @ Aw.T + np.sqrt(vw) * rng.standard_normal((S, m))
            else:
                wx = np.full((S, m), fixed[l])
            out += activate(wx, act) * fx
        Ad, vd = conditional_operator(hp.delta[0], XT, Xc)
        out += resid @ Ad.T + np.sqrt(vd) * rng.standard_normal((S, m))
        draws[:, start:start + m] = out
    return PredictiveSamples(draws)
