"""Approximate-MAP kernel hyperparameters given a latent point estimate.

With the latent state fixed at a point estimate the log posterior of the
hyperparameters is a sum of Gaussian log-densities, one per prior factor of
the model, plus independent priors on the log parameters:

* multi-source: ``[f_l; f_l(X_T)]`` under ``k_l``, ``omega_l(X_T)`` under
  ``k_omega_l`` and ``f_T - sum rho_l f_l`` under ``k_delta``;
* multi-fidelity: ``f_0`` over ``X_(0)`` under ``k_f``, ``omega_t`` over
  ``X_(t+1)`` under ``k_omega_t`` and ``f_{t+1} - rho_t f_t`` under
  ``k_delta_t``. On nested designs these are exactly the per-level
  factorized likelihood terms.

Each term involves exactly one kernel, so the objective is separable and
every kernel is optimized on its own term.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .core.gp import gp_loglik
from .core.kernels import KernelSpec, NumericalError
from .data import MultiFidelityData, MultiSourceData
from .params import MULTI_FIDELITY, MULTI_SOURCE, HyperParams
from .state import Chain, LatentState, LOLGPConfig, activate, rng_stream

LOG_VAR_BOUNDS = (np.log(1e-6), np.log(1e4))
LOG_LS_BOUNDS = (np.log(1e-2), np.log(1e2))
PILOT_STREAM, RESTART_STREAM, WARM_STREAM = 2, 3, 6
WARM_DELTA_VARIANCE = 1.0
# initial discrepancy variances tried for the pilot when no start is given
PILOT_DELTA_VARIANCES = (1.0, 0.1)
MIN_SELECTION_POINTS = 3


@dataclass(frozen=True)
class PriorSpec:
    """Independent normal priors on every log variance and log lengthscale.

    ``flat=True`` switches the prior term off entirely.
    """

    mean: float = 0.0
    sd: float = 1.0
    flat: bool = False

    def logpdf(self, theta) -> float:
        if self.flat:
            return 0.0
        z = (np.asarray(theta) - self.mean) / self.sd
        return float(np.sum(-0.5 * z * z - np.log(self.sd) - 0.5 * np.log(2 * np.pi)))

    def grad(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.flat:
            return np.zeros_like(theta)
        return -(theta - self.mean) / self.sd**2


FLAT = PriorSpec(flat=True)


@dataclass(frozen=True)
class Term:
    """One Gaussian factor: residual ``r`` at design ``X`` under kernel ``hp.<group>[index]``."""

    group: str
    index: int
    X: np.ndarray
    r: np.ndarray


def mode_of(data) -> str:
    if isinstance(data, MultiSourceData):
        return MULTI_SOURCE
    if isinstance(data, MultiFidelityData):
        return MULTI_FIDELITY
    raise TypeError(f"unsupported data type {type(data).__name__}")


def objective_terms(data, theta_hat: LatentState, activation: str = "relu",
                    frozen: tuple = ()) -> list[Term]:
    """Gaussian factors of the joint density at the latent point estimate.

    Latent-weight factors of frozen steps are omitted since those weights
    are not random.
    """
    def is_frozen(l):
        return l < len(frozen) and frozen[l] is not None

    terms = []
    if mode_of(data) == MULTI_SOURCE:
        XT, fT = data.target
        resid = fT.copy()
        for l, (X, fl) in enumerate(data.sources):
            terms.append(Term("f", l, np.vstack([X, XT]), np.concatenate([fl, theta_hat.f[l]])))
            if not is_frozen(l):
                terms.append(Term("omega", l, XT, theta_hat.omega[l]))
            resid = resid - activate(theta_hat.omega[l], activation) * theta_hat.f[l]
        terms.append(Term("delta", 0, XT, resid))
        return terms
    from .multifidelity import MFLayout, _full_level_values
    lay = MFLayout.from_data(data)
    full = _full_level_values(data, lay, theta_hat)
    terms.append(Term("f", 0, lay.aug[0], full[0]))
    for t in range(lay.n_steps):
        Xa = lay.aug[t + 1]
        if not is_frozen(t):
            terms.append(Term("omega", t, Xa, theta_hat.omega[t]))
        r = full[t + 1] - activate(theta_hat.omega[t], activation) * full[t][lay.down[t]]
        terms.append(Term("delta", t, Xa, r))
    return terms


def _term_value(term: Term, spec, prior: PriorSpec, with_grad: bool):
    theta = spec.to_log()
    if with_grad:
        ll, g = gp_loglik(spec, term.X, term.r, with_grad=True)
        return ll + prior.logpdf(theta), g + prior.grad(theta)
    return gp_loglik(spec, term.X, term.r) + prior.logpdf(theta)


def _slot_offsets(hp: HyperParams) -> dict:
    out, pos = {}, 0
    for group in ("f", "omega", "delta"):
        for i, k in enumerate(getattr(hp, group)):
            out[(group, i)] = (pos, pos + k.dim + 1)
            pos += k.dim + 1
    return out


def map_objective(hp: HyperParams, theta_hat: LatentState, data, prior: PriorSpec = PriorSpec(),
                  activation: str = "relu", frozen: tuple = (), with_grad: bool = False):
    """Log of ``[data | theta, Xi] [theta | Xi] [Xi]`` up to a Xi-free constant.

    The gradient (when requested) is with respect to ``hp.to_log()``;
    kernels without a term (frozen latent weights) get zero gradient and no
    prior contribution.
    """
    terms = objective_terms(data, theta_hat, activation, frozen)
    total = 0.0
    grad = np.zeros(len(hp.to_log()))
    slots = _slot_offsets(hp)
    for term in terms:
        spec = getattr(hp, term.group)[term.index]
        try:
            res = _term_value(term, spec, prior, with_grad)
        except NumericalError:
            return (-np.inf, grad) if with_grad else -np.inf
        if with_grad:
            a, b = slots[(term.group, term.index)]
            total += res[0]
            grad[a:b] += res[1]
        else:
            total += res
    return (float(total), grad) if with_grad else float(total)


def _bounds(dim: int):
    return [LOG_VAR_BOUNDS] + [LOG_LS_BOUNDS] * dim


def _random_start(rng, dim):
    return np.concatenate([[rng.uniform(np.log(0.05), np.log(5.0))],
                           rng.uniform(np.log(0.05), np.log(2.0), dim)])


def optimize_term(term: Term, spec, prior: PriorSpec, restarts: int, rng):
    """Best kernel for one term over ``restarts`` L-BFGS-B runs (first from ``spec``)."""
    def neg(theta):
        try:
            v, g = _term_value(term, spec.with_log(theta), prior, True)
        except NumericalError:
            return 1e25, np.zeros_like(theta)
        if not np.isfinite(v):
            return 1e25, np.zeros_like(theta)
        return -v, -g

    bounds = _bounds(spec.dim)
    lo, hi = np.array([b[0] for b in bounds]), np.array([b[1] for b in bounds])
    start_val = -neg(np.clip(spec.to_log(), lo, hi))[0]
    best_theta, best_val, inits = None, -np.inf, []
    for k in range(restarts):
        x0 = spec.to_log() if k == 0 else _random_start(rng, spec.dim)
        x0 = np.clip(x0, lo, hi)
        inits.append(-neg(x0)[0])
        res = optimize.minimize(neg, x0, jac=True, method="L-BFGS-B", bounds=bounds)
        if -res.fun > best_val:
            best_theta, best_val = res.x, -res.fun
    improved = best_val > start_val
    if not improved:
        return spec, start_val, inits, False
    return spec.with_log(best_theta), best_val, inits, True


@dataclass(frozen=True)
class MapResult:
    hp: HyperParams
    objective: float
    start_objective: float
    restart_inits: tuple
    improved: bool


def map_optimize(data, theta_hat: LatentState, hp0: HyperParams, prior: PriorSpec = PriorSpec(),
                 restarts: int = 5, seed: int = 0, activation: str = "relu",
                 frozen: tuple = ()) -> MapResult:
    """Maximize the approximate MAP objective with L-BFGS-B and random restarts.

    The first restart starts from ``hp0``; the rest start from random log
    parameters drawn from the seeded restart stream. Returns ``hp0`` (with a
    warning) if no restart improves on it.
    """
    rng = rng_stream(seed, RESTART_STREAM)
    groups = {g: list(getattr(hp0, g)) for g in ("f", "omega", "delta")}
    total, start, any_improved = 0.0, 0.0, False
    inits = np.zeros(restarts)
    for term in objective_terms(data, theta_hat, activation, frozen):
        spec = groups[term.group][term.index]
        new, val, ini, improved = optimize_term(term, spec, prior, restarts, rng)
        start += ini[0]
        inits += np.array(ini)
        total += val
        any_improved |= improved
        groups[term.group][term.index] = new
    if not any_improved:
        warnings.warn("no restart improved the MAP objective over the initial hyperparameters",
                      RuntimeWarning, stacklevel=2)
    hp = HyperParams(tuple(groups["f"]), tuple(groups["omega"]), tuple(groups["delta"]))
    return MapResult(hp, float(total), float(start), tuple(inits.tolist()), any_improved)


def sample_chain(data, hp: HyperParams, config: LOLGPConfig, stream: int | None = None) -> Chain:
    """Dispatch to the sampler of the data's transfer mode."""
    from .multifidelity import gibbs_sample_mf
    from .multisource import CHAIN_STREAM, gibbs_sample_ms

    stream = CHAIN_STREAM if stream is None else stream
    if mode_of(data) == MULTI_SOURCE:
        return gibbs_sample_ms(data, hp, config, stream=stream)
    return gibbs_sample_mf(data, hp, config, stream=stream)


@dataclass(frozen=True)
class TrainResult:
    """Fitted hyperparameters and chains.

    ``selection`` holds ``(delta_variance, loo_crps)`` per pilot start when
    several starts were compared, else ``()``.
    """

    hp: HyperParams
    chain: Chain
    pilot: Chain | None
    map: MapResult | None
    selection: tuple = ()


def pilot_config(config: LOLGPConfig) -> LOLGPConfig:
    """Quarter-length chain with a quarter of the burn-in."""
    n = max(config.iterations // 4, 2)
    return config.with_(iterations=n, burn_in=min(config.burn_in // 4, n - 1))


def warm_start(data, restarts: int = 5, seed: int = 0,
               delta_variance: float = WARM_DELTA_VARIANCE) -> HyperParams:
    """Starting hyperparameters for the pilot chain.

    Each source kernel (the level-1 kernel in multi-fidelity mode) is the
    flat-prior maximum-likelihood fit to that system's own observations,
    since those are fully observed. Latent-weight kernels keep the unit
    default and discrepancy kernels get variance ``delta_variance``. A
    small value lets the pilot explore transfer explanations before the
    discrepancy absorbs the target.
    """
    mode = mode_of(data)
    n_transfer = data.n_sources if mode == MULTI_SOURCE else data.n_levels - 1
    base = HyperParams.initial(mode, n_transfer, data.dim)
    systems = data.sources if mode == MULTI_SOURCE else data.levels[:1]
    rng = rng_stream(seed, WARM_STREAM)
    fk = []
    for l, (X, f) in enumerate(systems):
        if len(f) < 2:
            fk.append(base.f[l])
            continue
        spec, *_ = optimize_term(Term("f", l, X, np.asarray(f, dtype=float)), base.f[l],
                                 PriorSpec(flat=True), restarts, rng)
        fk.append(spec)
    delta = tuple(KernelSpec(delta_variance, k.lengthscales, k.nugget) for k in base.delta)
    return HyperParams(tuple(fk), base.omega, delta)


def _pilot_and_map(data, config, hp0, prior, restarts):
    pilot = sample_chain(data, hp0, pilot_config(config), stream=PILOT_STREAM)
    theta_hat = pilot.mean_state()
    res = map_optimize(data, theta_hat, hp0, prior, restarts, config.seed, config.activation,
                       pilot.frozen_omega)
    return pilot, res


def train_full(data, config: LOLGPConfig, hp0: HyperParams | None = None, prior: PriorSpec = PriorSpec(),
               restarts: int = 5, optimize_hp: bool = True,
               pilot_deltas: tuple = PILOT_DELTA_VARIANCES) -> TrainResult:
    """Pilot chain, latent posterior mean, MAP hyperparameters, then the final chain.

    The pilot runs at ``hp0`` when given. Otherwise one pilot runs from
    :func:`warm_start` for each initial discrepancy variance in
    ``pilot_deltas``, and the resulting hyperparameters with the lowest
    leave-one-out CRPS (:func:`lolgp.selection.loo_crps`, pilot-length
    chains) are kept. With ``optimize_hp=False`` the final chain is drawn at
    ``hp0`` (default kernels if omitted) with no pilot, which is exactly a
    direct call of the sampler.
    """
    from .selection import loo_crps

    mode = mode_of(data)
    n_transfer = data.n_sources if mode == MULTI_SOURCE else data.n_levels - 1
    if not optimize_hp or not n_transfer:
        hp0 = hp0 or HyperParams.initial(mode, n_transfer, data.dim)
        if not optimize_hp:
            return TrainResult(hp0, sample_chain(data, hp0, config), None, None)
        res = map_optimize(data, LatentState((), ()), hp0, prior, restarts, config.seed, config.activation, ())
        return TrainResult(res.hp, sample_chain(data, res.hp, config), None, res)
    if hp0 is not None:
        pilot, res = _pilot_and_map(data, config, hp0, prior, restarts)
        return TrainResult(res.hp, sample_chain(data, res.hp, config), pilot, res)
    if len(pilot_deltas) == 0:
        raise ValueError("pilot_deltas must name at least one variance")
    fits = [_pilot_and_map(data, config, warm_start(data, restarts, config.seed, dv), prior, restarts)
            for dv in pilot_deltas]
    selection = ()
    best = 0
    if len(fits) > 1 and len(data.target[1]) >= MIN_SELECTION_POINTS:
        scores = [loo_crps(data, res.hp, pilot_config(config)) for _, res in fits]
        selection = tuple(zip(map(float, pilot_deltas), scores))
        best = int(np.argmin(scores))
    pilot, res = fits[best]
    return TrainResult(res.hp, sample_chain(data, res.hp, config), pilot, res, selection)
