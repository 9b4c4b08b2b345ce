"""Periodic grid, Fourier-coefficient fields and norms on T = R/2piZ.

Coefficients are stored in FFT order and normalized so that

    u(x_j) = sum_k uhat(k) exp(i k x_j),    uhat = fft(u) / N,

which makes the discrete Parseval identity hold with unit constant:
``mass(u) = sum_k |uhat(k)|^2 = (1/N) sum_j |u(x_j)|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid of ``n_modes`` points on the torus.

    Wavenumbers are the integers ``-N/2, ..., N/2 - 1``; :attr:`wavenumbers`
    lists them in FFT order to match the coefficient layout.
    """

    n_modes: int

    def __post_init__(self):
        n = self.n_modes
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise InvalidArgument(f"n_modes must be an integer, got {n!r}")
        if n < 8 or n % 2:
            raise InvalidArgument(f"n_modes must be even and >= 8, got {n}")

    @cached_property
    def points(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_modes) / self.n_modes

    @property
    def dx(self) -> float:
        return 2 * np.pi / self.n_modes

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return np.fft.fftfreq(self.n_modes, d=1.0 / self.n_modes).astype(np.int64)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keeps |k| <= N/3 and always drops the Nyquist mode."""
        k = self.wavenumbers
        keep = np.abs(k) <= self.n_modes // 3
        keep[k == -self.n_modes // 2] = False
        return keep

    def to_physical(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.ifft(coeffs, axis=-1) * self.n_modes

    def to_coeffs(self, values: np.ndarray) -> np.ndarray:
        return np.fft.fft(values, axis=-1) / self.n_modes

    def index_of(self, k: int) -> int:
        """Array index holding wavenumber ``k``."""
        n = self.n_modes
        if not -n // 2 <= k < n // 2:
            raise InvalidArgument(f"wavenumber {k} not resolved on N={n}")
        return int(k % n)


def make_grid(n_modes: int) -> TorusGrid:
    return TorusGrid(n_modes)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Complex Fourier coefficients of a state on a :class:`TorusGrid`."""

    grid: TorusGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.shape != (self.grid.n_modes,):
            raise InvalidArgument(
                f"expected {self.grid.n_modes} coefficients, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise InvalidArgument("field has non-finite coefficients")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_physical(cls, grid: TorusGrid, values) -> SpectralField:
        return cls(grid, grid.to_coeffs(np.asarray(values, dtype=np.complex128)))

    @classmethod
    def zeros(cls, grid: TorusGrid) -> SpectralField:
        return cls(grid, np.zeros(grid.n_modes, dtype=np.complex128))

    @classmethod
    def mode(cls, grid: TorusGrid, k: int, amplitude: complex = 1.0) -> SpectralField:
        c = np.zeros(grid.n_modes, dtype=np.complex128)
        c[grid.index_of(k)] = amplitude
        return cls(grid, c)

    def to_physical(self) -> np.ndarray:
        return self.grid.to_physical(self.coeffs)

    def conj(self) -> SpectralField:
        """Coefficients of the pointwise complex conjugate u -> conj(u)."""
        return SpectralField(self.grid, np.conj(np.roll(self.coeffs[::-1], 1)))

    def _check(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        if other.grid != self.grid:
            raise InvalidArgument("fields live on different grids")
        return other

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)

    def __repr__(self):
        return f"SpectralField(N={self.grid.n_modes}, mass={mass(self):.6g})"


def resample(u: SpectralField, grid: TorusGrid) -> SpectralField:
    """Zero-pad or truncate ``u`` onto another grid (Nyquist mode dropped)."""
    out = np.zeros(grid.n_modes, dtype=np.complex128)
    kmax = min(u.grid.n_modes, grid.n_modes) // 2
    for k in range(-kmax + 1, kmax):
        out[grid.index_of(k)] = u.coeffs[u.grid.index_of(k)]
    return SpectralField(grid, out)


def japanese_bracket(x):
    return np.sqrt(1.0 + np.abs(np.asarray(x, dtype=float)) ** 2)


def dispersion_symbol(k):
    """Bourgain-space dispersion polynomial p(k) = k^4 - k^2."""
    k = np.asarray(k) if not np.isscalar(k) else k
    return k ** 4 - k ** 2


def free_frequency(k):
    """Plane-wave frequency of the linear flow: e^{ikx} -> e^{i(kx + w t)}.

    Derived from i u_t + u_xx - u_xxxx = 0, whose Fourier form is
    i uhat_t = (k^2 + k^4) uhat, hence w(k) = -(k^2 + k^4).
    """
    k = np.asarray(k, dtype=float) if not np.isscalar(k) else float(k)
    return -(k ** 2 + k ** 4)


def fractional_derivative(u: SpectralField, r: float) -> SpectralField:
    """D^r: multiply uhat(k) by |k|^r for k != 0, leave the mean untouched."""
    k = np.abs(u.grid.wavenumbers).astype(float)
    factor = np.ones_like(k)
    nz = k != 0
    factor[nz] = k[nz] ** r
    return SpectralField(u.grid, u.coeffs * factor)


def mass(u: SpectralField) -> float:
    return float(np.sum(np.abs(u.coeffs) ** 2))


def sobolev_norm(u: SpectralField, s: float) -> float:
    w = japanese_bracket(u.grid.wavenumbers) ** (2 * s)
    return float(np.sqrt(np.sum(w * np.abs(u.coeffs) ** 2)))


def l2_norm(u: SpectralField) -> float:
    return float(np.sqrt(mass(u)))
