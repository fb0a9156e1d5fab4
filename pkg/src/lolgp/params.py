"""Kernel hyperparameter collections for the transfer models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core.kernels import DEFAULT_NUGGET, InputError, KernelSpec

MULTI_SOURCE = "multi-source"
MULTI_FIDELITY = "multi-fidelity"


@dataclass(frozen=True)
class HyperParams:
    """Kernels of a transfer model.

    Multi-source: ``f`` holds one kernel per source, ``omega`` one per source
    and ``delta`` the single target discrepancy kernel. Multi-fidelity: ``f``
    holds the lowest-level kernel only, ``omega`` and ``delta`` one kernel per
    fidelity step.
    """

    f: tuple[KernelSpec, ...]
    omega: tuple[KernelSpec, ...]
    delta: tuple[KernelSpec, ...]

    def __post_init__(self):
        for name in ("f", "omega", "delta"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        dims = {k.dim for k in self.all()}
        if len(dims) > 1:
            raise InputError(f"kernels disagree on input dimension: {sorted(dims)}")

    def all(self) -> tuple[KernelSpec, ...]:
        return self.f + self.omega + self.delta

    def to_log(self) -> np.ndarray:
        return np.concatenate([k.to_log() for k in self.all()])

    def with_log(self, theta) -> "HyperParams":
        theta = np.asarray(theta, dtype=float)
        out, pos = [], 0
        for k in self.all():
            n = k.dim + 1
            out.append(k.with_log(theta[pos:pos + n]))
            pos += n
        nf, nw = len(self.f), len(self.omega)
        return HyperParams(out[:nf], out[nf:nf + nw], out[nf + nw:])

    @classmethod
    def initial(cls, mode: str, n_transfer: int, dim: int, lengthscale: float = 0.5,
                variance: float = 1.0, omega_variance: float = 1.0,
                nugget: float = DEFAULT_NUGGET) -> "HyperParams":
        """Starting kernels: unit variances and a common lengthscale."""
        k = KernelSpec.isotropic(dim, variance, lengthscale, nugget)
        kw = KernelSpec.isotropic(dim, omega_variance, lengthscale, nugget)
        if mode == MULTI_SOURCE:
            return cls((k,) * n_transfer, (kw,) * n_transfer, (k,))
        if mode == MULTI_FIDELITY:
            return cls((k,), (kw,) * n_transfer, (k,) * n_transfer)
        raise InputError(f"unknown mode {mode!r}")

    def to_dict(self) -> dict:
        return {name: [k.to_dict() for k in getattr(self, name)] for name in ("f", "omega", "delta")}

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        return cls(*(tuple(KernelSpec.from_dict(k) for k in d[name]) for name in ("f", "omega", "delta")))
