"""Seeded randomness: one Philox stream per (master seed, purpose, index).

Streams are derived by key, not by draw order, so an ensemble member gets
the same data no matter how members are scheduled.
"""

from __future__ import annotations

import zlib

import numpy as np

from .errors import InvalidArgument
from .torus import SpectralField, TorusGrid


def stream(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    if seed < 0 or index < 0:
        raise InvalidArgument("seed and index must be non-negative")
    key = zlib.crc32(purpose.encode("utf-8"))
    ss = np.random.SeedSequence([int(seed), key, int(index)])
    return np.random.Generator(np.random.Philox(ss))


def canonical_modes(kmax: int) -> np.ndarray:
    """0, 1, -1, 2, -2, ..., kmax, -kmax: draw order shared by every grid size."""
    out = [0]
    for k in range(1, kmax + 1):
        out += [k, -k]
    return np.array(out)


def random_field(grid: TorusGrid, rng: np.random.Generator, decay: float = 2.0,
                 kmax: int | None = None, mass: float | None = None) -> SpectralField:
    """Complex Gaussian coefficients scaled by <k>^-decay on |k| <= kmax.

    Modes are drawn in :func:`canonical_modes` order, so refining the grid
    keeps the low modes of a seeded draw and only appends new ones.
    ``mass`` rescales to the requested squared L^2 norm.
    """
    kmax = grid.n_modes // 3 if kmax is None else int(kmax)
    if not 0 <= kmax < grid.n_modes // 2:
        raise InvalidArgument(f"kmax={kmax} out of range for N={grid.n_modes}")
    ks = canonical_modes(kmax)
    z = rng.standard_normal((len(ks), 2)) @ np.array([1.0, 1j])
    coeffs = np.zeros(grid.n_modes, dtype=np.complex128)
    coeffs[ks % grid.n_modes] = z * (1.0 + ks.astype(float) ** 2) ** (-decay / 2)
    u = SpectralField(grid, coeffs)
    if mass is not None:
        m = float(np.sum(np.abs(coeffs) ** 2))
        u = SpectralField(grid, coeffs * np.sqrt(mass / m))
    return u


def random_ensemble(grid: TorusGrid, seed: int, size: int, purpose: str = "ensemble",
                    **kw) -> list[SpectralField]:
    return [random_field(grid, stream(seed, purpose, i), **kw) for i in range(size)]
