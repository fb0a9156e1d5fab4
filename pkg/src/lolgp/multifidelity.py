"""Multi-fidelity LOL-GP: generic Gibbs sampler, predictive composition and the nested fast path.

Model over fidelity levels ``0..L`` (level ``L`` is the target)::

    f_0 ~ GP(k_f),   f_{t+1}(x) = act(omega_t(x)) f_t(x) + delta_t(x)

Level ``l`` is needed on the augmented design ``X_(l)``, the union of the
designs at level ``l`` and above. Values of ``f_l`` at points of ``X_(l)``
outside ``X_l`` are latent. On nested designs ``X_(l) = X_l`` so no
function value is latent and the sampler only updates the latent weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core.gp import conditional_operator, gauss_logpdf, gp_fit, gp_predict, precision
from .core.kernels import InputError, cov
from .core.sweep import FVAL, OMEGA, GaussianFactor, SweepEngine
from .data import MultiFidelityData, match_rows
from .multisource import CHAIN_STREAM, CHUNK, PREDICT_STREAM, frozen_omega, run_engine
from .params import HyperParams
from .predictive import PredictiveSamples
from .state import ACTIVATIONS, Chain, LatentState, LOLGPConfig, activate, rng_stream


def _check_mf(data: MultiFidelityData, hp: HyperParams):
    L = data.n_levels - 1
    if len(hp.f) != 1 or len(hp.omega) != L or len(hp.delta) != L:
        raise InputError(f"hyperparameters describe {len(hp.delta)} fidelity steps but the data has {L}")


@dataclass
class MFLayout:
    """Designs and flat-state positions for a multi-fidelity sampler.

    ``aug[l]`` is ``X_(l)`` with level ``l``'s own points first;
    ``down[t]`` maps each point of ``aug[t+1]`` to its row in ``aug[t]``.
    """

    aug: list[np.ndarray]
    n_own: list[int]
    down: list[np.ndarray]
    w_off: list[int]
    f_off: list[int]

    @classmethod
    def from_data(cls, data: MultiFidelityData) -> "MFLayout":
        aug = data.augmented_designs()
        n_own = [len(X) for X, _ in data.levels]
        down = [match_rows(aug[t + 1], aug[t]) for t in range(len(aug) - 1)]
        w_off, pos = [], 0
        for t in range(len(aug) - 1):
            w_off.append(pos)
            pos += len(aug[t + 1])
        f_off = []
        for a in aug:
            f_off.append(pos)
            pos += len(a)
        return cls(aug, n_own, down, w_off, f_off)

    @property
    def n_steps(self) -> int:
        return len(self.aug) - 1

    def has_latent_f(self) -> bool:
        return any(len(a) > n for a, n in zip(self.aug, self.n_own))

    def full_f(self, l: int, data: MultiFidelityData, lat: np.ndarray) -> np.ndarray:
        """``f_l`` over ``aug[l]`` from the observed values and latent tail ``lat``."""
        return np.concatenate([data.levels[l][1], lat])

    def latent_from_chain(self, l: int, chain_f: np.ndarray) -> np.ndarray:
        """Latent tail of ``f_l`` over ``aug[l]`` extracted from chain columns on ``aug[l+1]``."""
        n = self.n_own[l]
        extra = len(self.aug[l]) - n
        if extra == 0:
            return np.zeros(chain_f.shape[:-1] + (0,))
        cols = np.empty(extra, dtype=int)
        cols[self.down[l][self.down[l] >= n] - n] = np.flatnonzero(self.down[l] >= n)
        return chain_f[..., cols]


def initial_state_mf(data: MultiFidelityData, hp: HyperParams, config: LOLGPConfig,
                     lay: MFLayout | None = None) -> LatentState:
    """Weights at ``init_omega``; latent values at the GP mean fitted to their own level."""
    _check_mf(data, hp)
    lay = lay or MFLayout.from_data(data)
    fixed = frozen_omega(hp, config)
    omega, f = [], []
    for t in range(lay.n_steps):
        Xa = lay.aug[t + 1]
        w0 = config.init_omega if fixed[t] is None else fixed[t]
        omega.append(np.full(len(Xa), float(w0)))
        X, ft = data.levels[t]
        full = np.empty(len(lay.aug[t]))
        full[:len(X)] = ft
        if len(lay.aug[t]) > len(X):
            spec = hp.f[0] if t == 0 else hp.delta[t - 1]
            full[len(X):] = gp_predict(gp_fit(X, ft, spec), lay.aug[t][len(X):])[0]
        f.append(full[lay.down[t]])
    return LatentState(tuple(omega), tuple(f))


def _full_level_values(data, lay, state):
    """``f_l`` over every ``aug[l]`` built from data and a latent state."""
    out = []
    for l in range(len(lay.aug)):
        v = np.empty(len(lay.aug[l]))
        v[:lay.n_own[l]] = data.levels[l][1]
        if l < lay.n_steps:
            lat = lay.down[l] >= lay.n_own[l]
            v[lay.down[l][lat]] = state.f[l][lat]
        out.append(v)
    return out


def build_engine_mf(data: MultiFidelityData, hp: HyperParams, config: LOLGPConfig,
                    state: LatentState) -> tuple[SweepEngine, MFLayout]:
    """Sweep engine with factors [F_0?, Omega_0.., Delta_0..] and level-major steps."""
    _check_mf(data, hp)
    lay = MFLayout.from_data(data)
    L = lay.n_steps
    act = config.activation
    fixed = frozen_omega(hp, config)
    fvals = _full_level_values(data, lay, state)
    vals = np.concatenate([*state.omega, *fvals])
    factors = []
    if len(lay.aug[0]) > lay.n_own[0]:
        factors.append(GaussianFactor("f1", precision(cov(hp.f[0], lay.aug[0]), hp.f[0].nugget), fvals[0]))
    g_w0 = len(factors)
    for t in range(L):
        n = len(lay.aug[t + 1])
        P = precision(cov(hp.omega[t], lay.aug[t + 1]), hp.omega[t].nugget) if fixed[t] is None else np.eye(n)
        factors.append(GaussianFactor(f"omega{t + 1}", P, state.omega[t].copy()))
    g_d0 = len(factors)
    for t in range(L):
        Xa = lay.aug[t + 1]
        r = fvals[t + 1] - activate(state.omega[t], act) * fvals[t][lay.down[t]]
        factors.append(GaussianFactor(f"delta{t + 1}", precision(cov(hp.delta[t], Xa), hp.delta[t].nugget), r))
    steps = []
    for t in range(L):
        for i, j in enumerate(lay.down[t]):
            fi = lay.f_off[t] + j
            if fixed[t] is None:
                steps.append((OMEGA, lay.w_off[t] + i, fi, g_w0 + t, i, g_d0 + t, i))
            if j >= lay.n_own[t]:
                gp = 0 if t == 0 else g_d0 + t - 1
                steps.append((FVAL, fi, lay.w_off[t] + i, gp, j, g_d0 + t, i))
    steps = np.array(steps, dtype=np.int64).reshape(-1, 7)
    record = np.concatenate([np.arange(lay.w_off[t], lay.w_off[t] + len(lay.aug[t + 1])) for t in range(L)]
                            + [lay.f_off[t] + lay.down[t] for t in range(L)]) if L else np.zeros(0, int)
    engine = SweepEngine(vals, factors, steps, record.astype(np.int64), ACTIVATIONS[act])
    if config.block_omega:
        engine.add_block_moves()
    return engine, lay


def gibbs_sample_mf(data: MultiFidelityData, hp: HyperParams, config: LOLGPConfig,
                    init: LatentState | None = None, stream: int = CHAIN_STREAM) -> Chain:
    """Gibbs chain over latent weights and latent function values (kept states only).

    On nested designs there are no latent function values, so only the
    weight coordinates are swept; ``config.nested=True`` with non-nested data
    raises.
    """
    if config.nested and not data.nested:
        raise InputError("nested sampling requested but the designs are not nested")
    lay = MFLayout.from_data(data)
    state = init if init is not None else initial_state_mf(data, hp, config, lay)
    engine, lay = build_engine_mf(data, hp, config, state)
    rows = run_engine(engine, config, rng_stream(config.seed, stream))
    sizes = [len(lay.aug[t + 1]) for t in range(lay.n_steps)]
    cuts = np.cumsum([0] + sizes)
    nw = cuts[-1]
    return Chain(tuple(rows[:, cuts[t]:cuts[t + 1]] for t in range(lay.n_steps)),
                 tuple(rows[:, nw + cuts[t]:nw + cuts[t + 1]] for t in range(lay.n_steps)),
                 config.activation, frozen_omega(hp, config))


def _omega_at(hp, chain, t, X_design, Xc, rng, S):
    fixed = chain.frozen_omega[t] if chain.frozen_omega else None
    if fixed is not None:
        return np.full((S, len(Xc)), fixed)
    A, v = conditional_operator(hp.omega[t], X_design, Xc)
    return chain.omega[t] @ A.T + np.sqrt(v) * rng.standard_normal((S, len(Xc)))


def predict_mf_generic(data: MultiFidelityData, hp: HyperParams, chain: Chain, X_test,
                       seed: int = 0) -> PredictiveSamples:
    """Per kept state draw ``f_0(x)``, then each ``f_{t+1}(x)`` given ``f_t(x)`` and the state."""
    _check_mf(data, hp)
    lay = MFLayout.from_data(data)
    X_test = np.asarray(X_test, dtype=float).reshape(-1, data.dim)
    S = chain.n_kept if lay.n_steps else 1
    act = chain.activation
    full = []
    for l in range(len(lay.aug)):
        obs = np.broadcast_to(data.levels[l][1], (S, lay.n_own[l]))
        lat = lay.latent_from_chain(l, chain.f[l]) if l < lay.n_steps else np.zeros((S, 0))
        full.append(np.hstack([obs, lat]))
    draws = np.empty((S, len(X_test)))
    for c, start in enumerate(range(0, len(X_test), CHUNK)):
        Xc = X_test[start:start + CHUNK]
        rng = rng_stream(seed, PREDICT_STREAM, c)
        m = len(Xc)
        A, v = conditional_operator(hp.f[0], lay.aug[0], Xc)
        fx = full[0] @ A.T + np.sqrt(v) * rng.standard_normal((S, m))
        for t in range(lay.n_steps):
            Xa = lay.aug[t + 1]
            wx = _omega_at(hp, chain, t, Xa, Xc, rng, S)
            resid = full[t + 1] - activate(chain.omega[t], act) * chain.f[t]
            Ad, vd = conditional_operator(hp.delta[t], Xa, Xc)
            fx = activate(wx, act) * fx + resid @ Ad.T + np.sqrt(vd) * rng.standard_normal((S, m))
        draws[:, start:start + m] = fx
    return PredictiveSamples(draws)


def recursive_moments(data: MultiFidelityData, hp: HyperParams, chain: Chain, Xc,
                      rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Per-state recursive predictive mean and variance on nested designs.

    ``mu_{t+1} = rho_t(x) mu_t + k^T K^{-1} z_{t+1}`` and
    ``s2_{t+1} = rho_t(x)^2 s2_t + k(x, x) - k^T K^{-1} k`` with
    ``z_{t+1} = f_{t+1} - rho_t(X_{t+1}) f_t(X_{t+1})`` and ``rho_t(x)``
    from the state's latent weight drawn at ``x``. Only per-level design
    matrices are factorized.
    """
    if not data.nested:
        raise InputError("the recursive predictor requires nested designs")
    L = data.n_levels - 1
    S = chain.n_kept if L else 1
    act = chain.activation
    X0, f0 = data.levels[0]
    A, v = conditional_operator(hp.f[0], X0, Xc)
    mu = np.broadcast_to(A @ f0, (S, len(Xc))).copy()
    s2 = np.broadcast_to(v, (S, len(Xc))).copy()
    for t in range(L):
        X1, f1 = data.levels[t + 1]
        wx = _omega_at(hp, chain, t, X1, Xc, rng, S)
        rx = activate(wx, act)
        z = f1 - activate(chain.omega[t], act) * chain.f[t]
        Ad, vd = conditional_operator(hp.delta[t], X1, Xc)
        mu = rx * mu + z @ Ad.T
        s2 = rx * rx * s2 + vd
    return mu, s2


def predict_mf_nested(data: MultiFidelityData, hp: HyperParams, chain: Chain, X_test,
                      seed: int = 0) -> PredictiveSamples:
    """Target draws from the recursive per-state Gaussian on nested designs."""
    _check_mf(data, hp)
    if not data.nested:
        raise InputError("predict_mf_nested requires nested designs")
    X_test = np.asarray(X_test, dtype=float).reshape(-1, data.dim)
    S = chain.n_kept if data.n_levels > 1 else 1
    draws = np.empty((S, len(X_test)))
    for c, start in enumerate(range(0, len(X_test), CHUNK)):
        Xc = X_test[start:start + CHUNK]
        rng = rng_stream(seed, PREDICT_STREAM, c)
        mu, s2 = recursive_moments(data, hp, chain, Xc, rng)
        draws[:, start:start + len(Xc)] = mu + np.sqrt(s2) * rng.standard_normal(mu.shape)
    return PredictiveSamples(draws)


def predict_mf(data, hp, chain, X_test, seed: int = 0, nested: bool | None = None) -> PredictiveSamples:
    """Route to the nested path on nested designs unless ``nested=False``."""
    use_nested = data.nested if nested is None else nested
    if use_nested:
        return predict_mf_nested(data, hp, chain, X_test, seed)
    return predict_mf_generic(data, hp, chain, X_test, seed)


def nested_residuals(data: MultiFidelityData, state: LatentState, activation: str = "relu") -> list[np.ndarray]:
    """``z_0 = f_0`` and ``z_l = f_l - rho_{l-1}(X_l) f_{l-1}(X_l)`` on nested designs."""
    if not data.nested:
        raise InputError("nested residuals require nested designs")
    z = [data.levels[0][1]]
    for t in range(data.n_levels - 1):
        X1, f1 = data.levels[t + 1]
        X0, f0 = data.levels[t]
        below = f0[match_rows(X1, X0)]
        z.append(f1 - activate(state.omega[t], activation) * below)
    return z


def nested_likelihood(data: MultiFidelityData, state: LatentState, hp: HyperParams,
                      activation: str = "relu") -> float:
    """Factorized log-density of all levels' data given the latent weights.

    Sum over levels of ``log N(z_l; 0, K_l(X_l, X_l))``; each level only
    factorizes its own design matrix.
    """
    _check_mf(data, hp)
    z = nested_residuals(data, state, activation)
    specs = [hp.f[0], *hp.delta]
    return float(sum(gauss_logpdf(zl, cov(k, X), k.nugget)
                     for zl, k, (X, _) in zip(z, specs, data.levels)))
