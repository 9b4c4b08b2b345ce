"""Discrete X_{b,s} norms and empirical Strichartz / trilinear ratios.

The norm of a sampled space-time field is evaluated through the identity
||u||_{X_{b,s}} = ||W(-t) u||_{H^b_t H^s_x}: each spatial mode is
demodulated by exp(-i p(k) t) before the time transform, so tau - p(k) is
read off directly on the dual grid of the (zero padded) window and the
fast k^4 oscillations never alias. The restriction norm is an infimum over
extensions; here ONE extension is used (the field multiplied by a Tukey
taper and extended by zero), so values are upper bounds for the restriction
norm on the untapered core of the window.

Space-time L^p norms use the measure dx/(2 pi) dt, which makes
``xbs_norm`` with b = s = 0 equal to the L^2 norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal.windows import tukey

from .errors import InvalidArgument
from .torus import (SpectralField, TorusGrid, dispersion_symbol, free_frequency,
                    japanese_bracket)

STRICHARTZ_B = 5 / 16
CONVENTIONS = ("solver", "quartic")


def modulation_symbol(k, convention: str = "solver"):
    """p(k) used in the weight <tau - p(k)>.

    ``"solver"``: the plane-wave frequency of the implemented flow,
    -(k^2 + k^4), on which free solutions concentrate.
    ``"quartic"``: the polynomial k^4 - k^2.
    """
    if convention == "solver":
        return free_frequency(k)
    if convention == "quartic":
        return np.asarray(dispersion_symbol(np.asarray(k, dtype=float)), dtype=float)
    raise InvalidArgument(f"unknown dispersion convention {convention!r}")


@dataclass(frozen=True)
class BourgainSpec:
    b: float
    s: float = 0.0
    window: float | None = None
    # None: use the taper carried by the field
    taper: str | None = None
    taper_fraction: float | None = None
    padding: int = 4
    convention: str = "solver"

    def __post_init__(self):
        if not -1 <= self.b <= 2:
            raise InvalidArgument(f"b must lie in [-1, 2], got {self.b}")
        if self.window is not None and not self.window > 0:
            raise InvalidArgument("window length must be positive")
        if self.taper not in (None, "cosine", "none"):
            raise InvalidArgument(f"unknown taper {self.taper!r}")
        if self.taper_fraction is not None and not 0 <= self.taper_fraction <= 0.5:
            raise InvalidArgument("taper_fraction must lie in [0, 0.5]")
        if self.padding < 1:
            raise InvalidArgument("padding must be >= 1")
        if self.convention not in CONVENTIONS:
            raise InvalidArgument(f"unknown dispersion convention {self.convention!r}")


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Samples u(x_j, t_m) on a uniform time grid starting at ``times[0]``."""

    grid: TorusGrid
    times: np.ndarray
    values: np.ndarray
    taper: str = "cosine"
    taper_fraction: float = 0.1

    def __post_init__(self):
        if self.taper not in ("cosine", "none"):
            raise InvalidArgument(f"unknown taper {self.taper!r}")
        if not 0 <= self.taper_fraction <= 0.5:
            raise InvalidArgument("taper_fraction must lie in [0, 0.5]")
        times = np.array(self.times, dtype=float)
        values = np.array(self.values, dtype=np.complex128)
        if values.shape != (len(times), self.grid.n_modes):
            raise InvalidArgument(f"values shape {values.shape} != ({len(times)}, {self.grid.n_modes})")
        if len(times) < 2:
            raise InvalidArgument("need at least two time samples")
        steps = np.diff(times)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise InvalidArgument("time grid must be uniform and increasing")
        if not np.all(np.isfinite(values)):
            raise InvalidArgument("field has non-finite samples")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def span(self) -> float:
        return float(self.times[-1] - self.times[0])

    @classmethod
    def free_solution(cls, u0: SpectralField, T: float, n_times: int, **kw) -> SpaceTimeField:
        """Exact free flow of ``u0`` sampled at ``n_times`` points of [0, T]."""
        times = np.linspace(0.0, T, n_times)
        omega = free_frequency(u0.grid.wavenumbers)
        coeffs = u0.coeffs[None, :] * np.exp(1j * np.outer(times, omega))
        return cls(u0.grid, times, u0.grid.to_physical(coeffs), **kw)

    @classmethod
    def from_trajectory(cls, traj, **kw) -> SpaceTimeField:
        return cls(traj.grid, traj.times, traj.physical(), **kw)

    @classmethod
    def plane_wave(cls, grid: TorusGrid, k: int, omega: float, T: float, n_times: int,
                   amplitude: complex = 1.0, **kw) -> SpaceTimeField:
        times = np.linspace(0.0, T, n_times)
        vals = amplitude * np.exp(1j * (k * grid.points[None, :] + omega * times[:, None]))
        return cls(grid, times, vals, **kw)

    def window_weights(self) -> np.ndarray:
        if self.taper == "none" or self.taper_fraction == 0:
            return np.ones(len(self.times))
        return tukey(len(self.times), alpha=2 * self.taper_fraction)

    def tapered(self) -> SpaceTimeField:
        return replace(self, values=self.values * self.window_weights()[:, None], taper="none")

    def scaled(self, c: complex) -> SpaceTimeField:
        return replace(self, values=self.values * c)

    def conj(self) -> SpaceTimeField:
        return replace(self, values=np.conj(self.values))

    def upsampled(self, factor: int) -> SpaceTimeField:
        """Same field on a ``factor``-times finer spatial grid (spectral interpolation)."""
        if factor == 1:
            return self
        n = self.grid.n_modes
        fine = TorusGrid(n * factor)
        coeffs = self.grid.to_coeffs(self.values)
        out = np.zeros((len(self.times), fine.n_modes), dtype=np.complex128)
        k = self.grid.wavenumbers
        out[:, k % fine.n_modes] = coeffs
        return replace(self, grid=fine, values=fine.to_physical(out))


def _same_times(*fields):
    t0 = fields[0].times
    for f in fields[1:]:
        if f.times.shape != t0.shape or not np.allclose(f.times, t0, rtol=0, atol=1e-12):
            raise InvalidArgument("fields are sampled on different time grids")
    g0 = fields[0].grid
    if any(f.grid != g0 for f in fields[1:]):
        raise InvalidArgument("fields live on different spatial grids")


def product(u1: SpaceTimeField, u2: SpaceTimeField, u3: SpaceTimeField,
            oversample: int = 3) -> SpaceTimeField:
    """Tapered u1 * u2 * conj(u3), formed on an alias-free finer spatial grid."""
    _same_times(u1, u2, u3)
    t1, t2, t3 = (u.tapered().upsampled(oversample) for u in (u1, u2, u3))
    return replace(t1, values=t1.values * t2.values * np.conj(t3.values))


def xbs_norm(u: SpaceTimeField, spec: BourgainSpec) -> float:
    """(sum_k int <k>^{2s} <tau - p(k)>^{2b} |u~(k, tau)|^2 dtau / 2pi)^{1/2} of the tapered field."""
    if spec.window is not None and not np.isclose(spec.window, u.span, rtol=1e-9):
        raise InvalidArgument(f"field spans {u.span}, spec window is {spec.window}")
    if spec.taper is not None or spec.taper_fraction is not None:
        u = replace(u, taper=spec.taper or u.taper,
                    taper_fraction=u.taper_fraction if spec.taper_fraction is None else spec.taper_fraction)
    w = u.window_weights()
    k = u.grid.wavenumbers
    coeffs = u.grid.to_coeffs(u.values) * w[:, None]
    t = u.times - u.times[0]
    demod = coeffs * np.exp(-1j * np.outer(t, modulation_symbol(k, spec.convention)))
    n_t = len(t)
    P = spec.padding * n_t
    F = np.fft.fft(demod, n=P, axis=0)
    sigma = 2 * np.pi * np.fft.fftfreq(P, d=u.dt)
    weight = japanese_bracket(sigma)[:, None] ** (2 * spec.b) * japanese_bracket(k)[None, :] ** (2 * spec.s)
    return float(np.sqrt(np.sum(weight * np.abs(F) ** 2) * u.dt / P))


def lp_norm(u: SpaceTimeField, p: float, oversample: int = 3) -> float:
    """Space-time L^p norm of the tapered field, measure dx/(2pi) dt."""
    v = u.tapered().upsampled(oversample)
    return float((np.sum(np.mean(np.abs(v.values) ** p, axis=1)) * u.dt) ** (1 / p))


@dataclass
class RatioStats:
    """Per-member ratios with summary statistics; ``skipped`` lists zero-norm members."""

    numerators: np.ndarray
    denominators: np.ndarray
    ratios: np.ndarray
    skipped: list = field(default_factory=list)

    @property
    def min(self) -> float:
        return float(np.min(self.ratios))

    @property
    def median(self) -> float:
        return float(np.median(self.ratios))

    @property
    def max(self) -> float:
        return float(np.max(self.ratios))

    def summary(self) -> dict:
        return {"min": self.min, "median": self.median, "max": self.max,
                "count": int(len(self.ratios)), "skipped": list(self.skipped)}

    def rows(self, names=("l4", "xnorm")):
        kept = [i for i in range(len(self.ratios) + len(self.skipped)) if i not in self.skipped]
        for i, a, b, r in zip(kept, self.numerators, self.denominators, self.ratios):
            yield {"member_id": i, names[0]: float(a), names[1]: float(b), "ratio": float(r)}


def strichartz_ratio(ensemble, convention: str = "solver", padding: int = 4) -> RatioStats:
    """||u||_{L^4} / ||u||_{X_{5/16,0}} per member."""
    spec = BourgainSpec(STRICHARTZ_B, 0.0, padding=padding, convention=convention)
    nums, dens, skipped = [], [], []
    for i, u in enumerate(ensemble):
        x = xbs_norm(u, spec)
        if x == 0:
            skipped.append(i)
            continue
        nums.append(lp_norm(u, 4))
        dens.append(x)
    if not nums:
        raise InvalidArgument("every ensemble member has zero X-norm")
    nums, dens = np.array(nums), np.array(dens)
    return RatioStats(nums, dens, nums / dens, skipped)


def trilinear_ratio(u1: SpaceTimeField, u2: SpaceTimeField, u3: SpaceTimeField, b: float,
                    s: float, convention: str = "solver", padding: int = 4) -> float:
    """||u1 u2 conj(u3)||_{X_{-b,s}} / (||u1||_{X_{5/16,0}} ||u2||_{X_{5/16,0}} ||u3||_{X_{5/16,s}})."""
    if b < STRICHARTZ_B:
        raise InvalidArgument(f"trilinear estimate needs b >= 5/16, got {b}")
    base = dict(padding=padding, convention=convention)
    den = (xbs_norm(u1, BourgainSpec(STRICHARTZ_B, 0.0, **base))
           * xbs_norm(u2, BourgainSpec(STRICHARTZ_B, 0.0, **base))
           * xbs_norm(u3, BourgainSpec(STRICHARTZ_B, s, **base)))
    if den == 0:
        raise InvalidArgument("zero X-norm in the trilinear denominator")
    num = xbs_norm(product(u1, u2, u3), BourgainSpec(-b, s, **base))
    return num / den
