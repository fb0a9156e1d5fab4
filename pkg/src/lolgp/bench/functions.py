"""Analytic test functions with local (or global) transfer structure.

Two of the source/high-fidelity definitions take the square root of a
quantity that is negative on the region where the term is active. The
``branch`` argument fixes the convention used there:

* ``"abs"`` (default): ``sqrt(|u|)``, which keeps the term oscillatory;
* ``"real-part"``: the real part of the principal root, i.e. 0 for ``u < 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..core.kernels import InputError

BRANCHES = ("abs", "real-part")
DEFAULT_BRANCH = "abs"


def _sqrt_branch(u, branch: str):
    u = np.asarray(u, dtype=float)
    if branch == "abs":
        return np.sqrt(np.abs(u))
    if branch == "real-part":
        return np.sqrt(np.maximum(u, 0.0))
    raise InputError(f"branch must be one of {BRANCHES}, got {branch!r}")


def forrester(x):
    x = np.asarray(x, dtype=float)
    return 0.2 * (6 * x - 2) ** 2 * np.sin(12 * x - 4) + 0.5


# -- 1-d motivating pair ---------------------------------------------------

def motivating_source(x, branch=DEFAULT_BRANCH):
    x = np.asarray(x, dtype=float)
    lo = x < 0.5
    return (forrester(x) + 0.6 * (x >= 0.5) * (x - 0.5)
            + 1.6 * lo * (x - 0.5) * np.sin(30 * x) * _sqrt_branch(5 * x - 4, branch))


# -- multi-source Forrester --------------------------------------------------

def forrester_ms_1(x):
    x = np.asarray(x, dtype=float)
    return (forrester(x) + 0.4 * (x < 0.5) * (x - 0.5)
            + 1.6 * (x >= 0.5) * (x - 0.5) * np.cos(40 * x) * (5 * x - 1))


def forrester_ms_2(x):
    x = np.asarray(x, dtype=float)
    lo = x < 0.5
    root = np.sqrt(np.where(lo, 4 - 5 * x, 0.0))  # real wherever the term is active
    return forrester(x) + 0.4 * (~lo) * (x - 0.5) + 1.6 * lo * (x - 0.5) * np.cos(20 * x) * root


# -- multi-source Friedman ---------------------------------------------------

def _cols(X, d):
    X = np.asarray(X, dtype=float)
    X = X[None, :] if X.ndim == 1 else X
    if X.shape[1] != d:
        raise InputError(f"expected {d} input columns, got {X.shape[1]}")
    return [X[:, j] for j in range(d)]


def friedman_target(X):
    x1, x2, x3, x4, x5 = _cols(X, 5)
    return 2 * np.sin(np.pi * x1 * x2) + 8 * (x3 - 0.5) ** 2 + 2 * x4 - x5


def friedman_source_1(X):
    x1, x2, x3, x4, x5 = _cols(X, 5)
    lo = x3 < 0.5
    bracket = 1.2 * lo + (~lo) * (1 + 2 * np.sin(30 * (x3 - 0.5)))
    return 2 * np.sin(np.pi * x1 * x2) + 2.2 * x4 - x5 + 8 * (x3 - 0.5) ** 2 * bracket


def friedman_source_2(X):
    x1, x2, x3, x4, x5 = _cols(X, 5)
    lo = x3 < 0.5
    bracket = (~lo) * 1.0 + 1.5 * lo * (1 + np.sin(20 * (x3 - 0.5) - 1.5))
    return 2 * np.sin(np.pi * x1 * x2) + 2 * x4 - 0.8 * x5 + 8 * (x3 - 0.5) ** 2 * bracket


# -- multi-fidelity Forrester ------------------------------------------------

def forrester_mf_low(x):
    return 0.2 * (6 * np.asarray(x, float) - 2) ** 2 * np.sin(12 * np.asarray(x, float) - 4) + 0.8


def forrester_mf_high(x, branch=DEFAULT_BRANCH):
    x = np.asarray(x, dtype=float)
    hi = x > 0.5
    lift = hi * np.sqrt(np.where(hi, 2 * x - 1, 0.0)) * forrester_mf_low(x)
    return lift + 3.2 * (~hi) * (1 - 2 * x) * (np.sin(14 * _sqrt_branch(x - 0.5, branch)) - 1)


def forrester_mf_global_low(x):
    return forrester(x)


def forrester_mf_global_high(x):
    x = np.asarray(x, dtype=float)
    return 0.2 * (6 * x - 2) ** 2 * np.sin(12 * x - 4) + 1.6 * (1 - x) + 0.5


# -- multi-fidelity Branin ---------------------------------------------------

def branin_1(X):
    x1, x2 = _cols(X, 2)
    return 0.01 * (x2 - 5.1 / (4 * np.pi**2) * x1**2 + 5 / np.pi * x1 - 1) ** 2


def branin_2(X):
    x1, _ = _cols(X, 2)
    return branin_1(X) + 0.1 * ((1 - 1 / (8 * np.pi)) * np.cos(x1**2) + 1)


def branin_3(X):
    x1, x2 = _cols(X, 2)
    up = x2 > 3
    return up * (x2 - 3) / 7 * branin_2(X) - (~up) * (x2 - 3) / 5 * np.sin(2 * (x1 + 1) / (3 * np.pi))


@dataclass(frozen=True)
class TestFunction:
    """A named suite member: one callable per system and its input box."""

    name: str
    mode: str
    systems: tuple[Callable, ...]
    roles: tuple[str, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    uses_branch: tuple[bool, ...] = ()

    @property
    def dim(self) -> int:
        return len(self.lower)

    def to_unit(self, X):
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return (np.asarray(X, dtype=float) - lo) / (hi - lo)

    def from_unit(self, U):
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return lo + np.asarray(U, dtype=float) * (hi - lo)

    def evaluate(self, role: str | int, X, branch: str = DEFAULT_BRANCH, check: bool = True) -> np.ndarray:
        """Value of one system at ``X`` given in the function's own box."""
        idx = role if isinstance(role, int) else self.roles.index(role)
        X = np.asarray(X, dtype=float)
        X2 = X.reshape(-1, 1) if self.dim == 1 else np.atleast_2d(X)
        if check:
            lo, hi = np.asarray(self.lower), np.asarray(self.upper)
            if np.any(X2 < lo - 1e-12) or np.any(X2 > hi + 1e-12):
                raise InputError(f"{self.name}: input outside the domain box {self.lower}..{self.upper}")
        fn = self.systems[idx]
        arg = X2[:, 0] if self.dim == 1 else X2
        if self.uses_branch and self.uses_branch[idx]:
            return np.asarray(fn(arg, branch=branch), dtype=float)
        return np.asarray(fn(arg), dtype=float)


SUITE = {
    "forrester-motivating": TestFunction(
        "forrester-motivating", "multi-source", (motivating_source, forrester), ("source1", "target"),
        (0.0,), (1.0,), (True, False)),
    "forrester-ms": TestFunction(
        "forrester-ms", "multi-source", (forrester_ms_1, forrester_ms_2, forrester),
        ("source1", "source2", "target"), (0.0,), (1.0,)),
    "friedman-ms": TestFunction(
        "friedman-ms", "multi-source", (friedman_source_1, friedman_source_2, friedman_target),
        ("source1", "source2", "target"), (0.0,) * 5, (1.0,) * 5),
    "forrester-mf": TestFunction(
        "forrester-mf", "multi-fidelity", (forrester_mf_low, forrester_mf_high), ("level1", "level2"),
        (0.0,), (1.0,), (False, True)),
    "branin-mf": TestFunction(
        "branin-mf", "multi-fidelity", (branin_1, branin_2, branin_3), ("level1", "level2", "level3"),
        (-5.0, -5.0), (10.0, 10.0)),
    "forrester-mf-no-local": TestFunction(
        "forrester-mf-no-local", "multi-fidelity", (forrester_mf_global_low, forrester_mf_global_high),
        ("level1", "level2"), (0.0,), (1.0,)),
}


def eval_testfn(name: str, role: str | int, x, branch: str = DEFAULT_BRANCH) -> np.ndarray:
    """Evaluate system ``role`` of suite function ``name`` at ``x`` (function's own box)."""
    if name not in SUITE:
        raise InputError(f"unknown test function {name!r}; available: {', '.join(SUITE)}")
    return SUITE[name].evaluate(role, x, branch)
