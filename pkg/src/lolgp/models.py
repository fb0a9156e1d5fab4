"""Fit/predict wrappers that handle output standardization for every surrogate.

All systems share one affine transform fitted to the target outputs, so the
transfer relations between systems are preserved; predictions are mapped
back to the original output scale.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import fit_gp_only, fit_ko
from .data import MultiFidelityData, MultiSourceData, Standardizer
from .hyperopt import PILOT_DELTA_VARIANCES, PriorSpec, TrainResult, mode_of, train_full
from .metrics import diagnose
from .multifidelity import predict_mf
from .multisource import predict_ms
from .params import MULTI_SOURCE, HyperParams
from .state import Chain, LOLGPConfig

MODEL_NAMES = ("gp", "ko", "bko", "lolgp")


def target_of(data):
    return data.target


@dataclass
class Surrogate:
    """Common fit/predict interface; ``fit_seconds`` is wall-clock fitting time."""

    name: str = "model"
    seed: int = 0
    standardizer: Standardizer = field(default_factory=Standardizer)
    fit_seconds: float = float("nan")
    data: object = None

    def fit(self, data) -> "Surrogate":
        self.data = data
        self.standardizer = Standardizer.from_outputs(target_of(data)[1])
        t0 = time.perf_counter()
        self._fit(data.standardized(self.standardizer))
        self.fit_seconds = time.perf_counter() - t0
        return self

    def predict(self, X_new):
        return self._predict(np.asarray(X_new, dtype=float)).transformed(self.standardizer)

    def ess_min(self) -> float:
        return float("nan")


@dataclass
class GPModel(Surrogate):
    name: str = "gp"
    restarts: int = 5
    fitted: object = None

    def _fit(self, data):
        X, f = target_of(data)
        self.fitted = fit_gp_only(X, f, self.restarts, self.seed)

    def _predict(self, X_new):
        return self.fitted.predict(X_new)


@dataclass
class KOSurrogate(Surrogate):
    name: str = "ko"
    restarts: int = 5
    fixed_rho: object = None
    fitted: object = None

    def _fit(self, data):
        self.fitted = fit_ko(data, self.restarts, self.seed, self.fixed_rho)

    def _predict(self, X_new):
        return self.fitted.predict(X_new)


@dataclass
class LOLGP(Surrogate):
    """LOL-GP (ReLU transfer) or, with ``activation="identity"``, Bayesian KO."""

    name: str = "lolgp"
    config: LOLGPConfig = field(default_factory=LOLGPConfig)
    restarts: int = 5
    prior: PriorSpec = field(default_factory=PriorSpec)
    hp0: HyperParams | None = None
    optimize_hp: bool = True
    nested: bool | None = None
    pilot_deltas: tuple = PILOT_DELTA_VARIANCES
    result: TrainResult | None = None
    _std_data: object = None

    def _fit(self, data):
        self._std_data = data
        cfg = self.config.with_(seed=self.seed) if self.seed != self.config.seed else self.config
        self.result = train_full(data, cfg, self.hp0, self.prior, self.restarts, self.optimize_hp,
                                 self.pilot_deltas)

    @property
    def hp(self) -> HyperParams:
        return self.result.hp

    @property
    def chain(self) -> Chain:
        return self.result.chain

    def _predict(self, X_new):
        d = self._std_data
        if mode_of(d) == MULTI_SOURCE:
            return predict_ms(d, self.hp, self.chain, X_new, self.seed)
        return predict_mf(d, self.hp, self.chain, X_new, self.seed, self.nested)

    def ess_min(self) -> float:
        cols, names = self.chain.monitored()
        return diagnose(cols, names).ess_min if names else float("nan")


def make_model(name: str, seed: int = 0, config: LOLGPConfig | None = None, restarts: int = 5,
               nested: bool | None = None, prior: PriorSpec | None = None) -> Surrogate:
    """Model by CLI name: ``gp``, ``ko``, ``bko`` or ``lolgp``.

    ``prior`` sets the hyperparameter prior of the sampling models (default
    :class:`PriorSpec`); the maximum-likelihood baselines ignore it.
    """
    config = config or LOLGPConfig(seed=seed)
    prior = prior or PriorSpec()
    if name == "gp":
        return GPModel(seed=seed, restarts=restarts)
    if name == "ko":
        return KOSurrogate(seed=seed, restarts=restarts)
    if name == "lolgp":
        return LOLGP(seed=seed, config=config.with_(activation="relu"), restarts=restarts, nested=nested,
                     prior=prior)
    if name == "bko":
        return LOLGP(name="bko", seed=seed, config=config.with_(activation="identity"),
                     restarts=restarts, nested=nested, prior=prior)
    raise ValueError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")


__all__ = ["GPModel", "KOSurrogate", "LOLGP", "MODEL_NAMES", "MultiFidelityData", "MultiSourceData",
           "Surrogate", "make_model"]
