"""Latent Gibbs states, chains and sampler configuration shared by both transfer modes."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core.kernels import InputError
from .core.sweep import IDENTITY, RELU

ACTIVATIONS = {"relu": RELU, "identity": IDENTITY}


def activate(w, activation: str = "relu") -> np.ndarray:
    """Transfer weight from a latent weight: ReLU for LOL-GP, identity for BKO."""
    w = np.asarray(w, dtype=float)
    return w if activation == "identity" else np.maximum(w, 0.0)


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the stream ``key`` under the 64-bit ``seed``."""
    ss = np.random.SeedSequence(int(seed) % 2**64, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class LOLGPConfig:
    """Sampler settings.

    ``iterations`` counts every sweep including the ``burn_in`` ones, so the
    kept chain has ``iterations - burn_in`` states. ``fixed_omega`` pins every
    latent weight to a constant (diagnostic mode); a latent-weight kernel with
    zero variance and zero nugget pins that source's weights to 0.
    ``block_omega`` adds one elliptical slice move per latent-weight vector
    to every sweep on top of the single-site updates.
    """

    iterations: int = 10000
    burn_in: int = 1000
    activation: str = "relu"
    seed: int = 0
    init_omega: float = 1.0
    fixed_omega: float | None = None
    backend: str | None = None
    nested: bool | None = None
    block_omega: bool = True

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise InputError(f"activation must be one of {sorted(ACTIVATIONS)}, got {self.activation!r}")
        if not (0 <= self.burn_in < self.iterations):
            raise InputError(f"need iterations > burn_in >= 0, got {self.iterations} and {self.burn_in}")

    @property
    def n_kept(self) -> int:
        return self.iterations - self.burn_in

    def with_(self, **kw) -> "LOLGPConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class LatentState:
    """Latent weights and latent function values for each transfer step.

    In multi-source mode entry ``l`` covers source ``l`` at the target design.
    In multi-fidelity mode entry ``l`` covers fidelity step ``l -> l+1`` at
    the augmented design of level ``l+1`` (observed values included).
    """

    omega: tuple[np.ndarray, ...]
    f: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(np.asarray(w, dtype=float).copy() for w in self.omega))
        object.__setattr__(self, "f", tuple(np.asarray(v, dtype=float).copy() for v in self.f))
        for w, v in zip(self.omega, self.f):
            if w.shape != v.shape:
                raise InputError("latent weight and function vectors must have equal lengths")


@dataclass(frozen=True)
class Chain:
    """Kept Gibbs states, each entry shaped ``(n_kept, n_points)``."""

    omega: tuple[np.ndarray, ...]
    f: tuple[np.ndarray, ...]
    activation: str = "relu"
    frozen_omega: tuple[float | None, ...] = field(default=())

    @property
    def n_kept(self) -> int:
        return len(self.omega[0]) if self.omega else 0

    def rho(self, l: int) -> np.ndarray:
        return activate(self.omega[l], self.activation)

    def mean_state(self) -> LatentState:
        return LatentState(tuple(w.mean(axis=0) for w in self.omega), tuple(v.mean(axis=0) for v in self.f))

    def last_state(self) -> LatentState:
        return LatentState(tuple(w[-1] for w in self.omega), tuple(v[-1] for v in self.f))

    def monitored(self) -> tuple[np.ndarray, list[str]]:
        """Latent weights and latent values at three fixed coordinates per step."""
        cols, names = [], []
        for l, (w, v) in enumerate(zip(self.omega, self.f)):
            n = w.shape[1]
            for i in sorted({0, n // 2, n - 1}):
                if self._frozen(l) is None:
                    cols.append(w[:, i])
                    names.append(f"omega{l + 1}[{i}]")
                if np.ptp(v[:, i]) > 0:
                    cols.append(v[:, i])
                    names.append(f"f{l + 1}[{i}]")
        if not cols:
            return np.zeros((self.n_kept, 0)), names
        return np.column_stack(cols), names

    def _frozen(self, l):
        return self.frozen_omega[l] if l < len(self.frozen_omega) else None

    def to_dict(self) -> dict:
        return {"activation": self.activation,
                "frozen_omega": list(self.frozen_omega),
                "omega": [w.tolist() for w in self.omega],
                "f": [v.tolist() for v in self.f]}

    @classmethod
    def from_dict(cls, d: dict) -> "Chain":
        return cls(tuple(np.asarray(w, dtype=float).reshape(len(w), -1) for w in d["omega"]),
                   tuple(np.asarray(v, dtype=float).reshape(len(v), -1) for v in d["f"]),
                   d.get("activation", "relu"), tuple(d.get("frozen_omega", ())))
