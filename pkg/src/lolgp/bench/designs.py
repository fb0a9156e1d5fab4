"""Experimental designs on the unit box: equispaced grids, Latin hypercubes and nested hierarchies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from ..core.kernels import InputError

KINDS = ("equispaced", "offset-equispaced", "latin-hypercube", "nested-hierarchy")


def equispaced(n: int) -> np.ndarray:
    """``n`` points from 0 to 1 inclusive (a single point sits at 0.5)."""
    if n < 1:
        raise InputError("design size must be >= 1")
    return (np.linspace(0.0, 1.0, n) if n > 1 else np.array([0.5]))[:, None]


def offset_equispaced(n: int) -> np.ndarray:
    """Cell midpoints ``(i + 0.5) / n``, equally spaced and clear of the box edges."""
    if n < 1:
        raise InputError("design size must be >= 1")
    return ((np.arange(n) + 0.5) / n)[:, None]


def latin_hypercube(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Random LHD: exactly one point in each ``[k/n, (k+1)/n)`` stratum per axis."""
    if n < 1 or d < 1:
        raise InputError("LHD needs n >= 1 and d >= 1")
    return qmc.LatinHypercube(d=d, seed=rng).random(n)


def nested_lhd(sizes, d: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Nested hierarchy ``X_K ⊆ ... ⊆ X_1`` where each ``X_k`` is itself an LHD.

    ``sizes`` are non-increasing and each must divide the previous one. Built
    top-down: the smallest design picks one fine stratum inside each of its
    coarse strata, then each larger design fills the strata its subset left
    empty, choosing fine strata that are still free.
    """
    sizes = [int(s) for s in sizes]
    if any(s < 1 for s in sizes) or any(a < b for a, b in zip(sizes, sizes[1:])):
        raise InputError(f"nested sizes must be positive and non-increasing, got {sizes}")
    if any(a % b for a, b in zip(sizes, sizes[1:])):
        raise InputError(f"each nested size must divide the next larger one, got {sizes}")
    n_fine = sizes[0]
    order = sizes[::-1]
    cells = np.empty((n_fine, d), dtype=int)
    for j in range(d):
        col = []
        for k, n in enumerate(order):
            ratio = n_fine // n
            taken = {c // ratio for c in col}
            free = [s for s in range(n) if s not in taken]
            free = list(rng.permutation(free))
            used = set(col)
            for s in free:
                options = [c for c in range(s * ratio, (s + 1) * ratio) if c not in used]
                c = int(rng.choice(options))
                col.append(c)
                used.add(c)
        cells[:, j] = col
    X = (cells + rng.random((n_fine, d))) / n_fine
    # rows are ordered smallest design first, so every prefix is a nested level
    return [X[:n] for n in sizes]


@dataclass(frozen=True)
class DesignSpec:
    """Design recipe: ``kind``, sizes per system, dimension and seed."""

    kind: str
    sizes: tuple[int, ...]
    dim: int = 1
    seed: int = 0

    def build(self) -> list[np.ndarray]:
        return make_design(self, np.random.default_rng(self.seed))


def make_design(spec: DesignSpec, rng: np.random.Generator) -> list[np.ndarray]:
    """One design per system, on the unit box."""
    if spec.kind == "equispaced":
        if spec.dim != 1:
            raise InputError("equispaced designs are 1-d")
        return [equispaced(n) for n in spec.sizes]
    if spec.kind == "offset-equispaced":
        return [offset_equispaced(n) for n in spec.sizes]
    if spec.kind == "latin-hypercube":
        return [latin_hypercube(n, spec.dim, rng) for n in spec.sizes]
    if spec.kind == "nested-hierarchy":
        return nested_lhd(spec.sizes, spec.dim, rng)
    raise InputError(f"unknown design kind {spec.kind!r}; choose from {KINDS}")
