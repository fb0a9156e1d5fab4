"""Multi-source and multi-fidelity training data containers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core.kernels import InputError, as_design

NEST_TOL = 1e-12


def match_rows(A: np.ndarray, B: np.ndarray, tol: float = NEST_TOL) -> np.ndarray:
    """Index into ``B`` of each row of ``A`` (``-1`` when absent)."""
    if len(A) == 0:
        return np.zeros(0, dtype=int)
    if len(B) == 0:
        return np.full(len(A), -1)
    d = np.max(np.abs(A[:, None, :] - B[None, :, :]), axis=2)
    hit = d <= tol
    return np.where(hit.any(axis=1), np.argmax(hit, axis=1), -1)


def _check_system(X, f, dim, label):
    X = as_design(X, dim)
    f = np.asarray(f, dtype=float).ravel()
    if len(f) != len(X):
        raise InputError(f"{label}: {len(X)} inputs but {len(f)} outputs")
    if not np.all(np.isfinite(f)):
        raise InputError(f"{label}: outputs contain non-finite values")
    if len(X) > 1:
        idx = match_rows(X, X)
        if np.any(idx != np.arange(len(X))):
            raise InputError(f"{label}: duplicated input point")
    return X, f


@dataclass(frozen=True)
class Standardizer:
    """Affine output transform shared by every system: ``z = (y - shift) / scale``."""

    shift: float = 0.0
    scale: float = 1.0

    @classmethod
    def from_outputs(cls, f) -> "Standardizer":
        f = np.asarray(f, dtype=float)
        if len(f) == 0:
            return cls()
        sd = float(np.std(f))
        return cls(float(np.mean(f)), sd if sd > 1e-12 else 1.0)

    def forward(self, y):
        return (np.asarray(y, dtype=float) - self.shift) / self.scale

    def inverse(self, z):
        return np.asarray(z, dtype=float) * self.scale + self.shift


@dataclass(frozen=True)
class MultiSourceData:
    """Source systems ``(X_l, f_l)`` plus the target ``(X_T, f_T)``."""

    sources: tuple[tuple[np.ndarray, np.ndarray], ...]
    target: tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        XT, fT = self.target
        XT = as_design(XT)
        dim = XT.shape[1]
        XT, fT = _check_system(XT, fT, dim, "target")
        if len(fT) < 1:
            raise InputError("target needs at least one observation")
        src = []
        for l, (X, f) in enumerate(self.sources):
            X, f = _check_system(X, f, dim, f"source {l + 1}")
            if np.any(match_rows(X, XT) >= 0):
                raise InputError(
                    f"source {l + 1} shares a design point with the target; shared "
                    "source/target inputs are not supported in multi-source mode (SM1 exclusion)")
            src.append((X, f))
        object.__setattr__(self, "sources", tuple(src))
        object.__setattr__(self, "target", (XT, fT))

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    @property
    def dim(self) -> int:
        return self.target[0].shape[1]

    def standardized(self, st: Standardizer) -> "MultiSourceData":
        return MultiSourceData(tuple((X, st.forward(f)) for X, f in self.sources),
                               (self.target[0], st.forward(self.target[1])))


@dataclass(frozen=True)
class MultiFidelityData:
    """Levels ``(X_l, f_l)`` ordered by increasing fidelity; the last is the target."""

    levels: tuple[tuple[np.ndarray, np.ndarray], ...]
    nested: bool | None = None

    def __post_init__(self):
        if len(self.levels) < 1:
            raise InputError("need at least one fidelity level")
        dim = as_design(self.levels[-1][0]).shape[1]
        levels = tuple(_check_system(X, f, dim, f"level {l + 1}")
                       for l, (X, f) in enumerate(self.levels))
        object.__setattr__(self, "levels", levels)
        detected = all(np.all(match_rows(levels[l + 1][0], levels[l][0]) >= 0)
                       for l in range(len(levels) - 1))
        if self.nested is None:
            object.__setattr__(self, "nested", detected)
        elif self.nested and not detected:
            raise InputError("nested=True but the designs are not nested (X_(l+1) must be a "
                             "subset of X_l for every level)")

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def dim(self) -> int:
        return self.levels[-1][0].shape[1]

    @property
    def target(self):
        return self.levels[-1]

    def standardized(self, st: Standardizer) -> "MultiFidelityData":
        return MultiFidelityData(tuple((X, st.forward(f)) for X, f in self.levels), self.nested)

    def augmented_designs(self) -> list[np.ndarray]:
        """``X_(l)`` for every level: all points at fidelity ``l`` or higher.

        Ordering is level ``l``'s own points first, then new points of
        ``X_(l+1)`` in their order.
        """
        aug = [None] * self.n_levels
        aug[-1] = self.levels[-1][0]
        for l in range(self.n_levels - 2, -1, -1):
            X = self.levels[l][0]
            upper = aug[l + 1]
            extra = upper[match_rows(upper, X) < 0]
            aug[l] = np.vstack([X, extra]) if len(extra) else X
        return aug
