"""Damped 4NLS: decay measurement and empirical observability constants."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import EvolutionParams, Trajectory, evolve, integrate, time_nodes, trapezoid_weights
from .errors import InvalidArgument
from .profiles import DampingProfile
from .torus import SpectralField, TorusGrid

__all__ = [
    "DampingProfile", "DecayReport", "ObservabilityReport",
    "run_damped", "fit_decay_rate", "observability_constant", "damped_integrals",
]


def run_damped(u0: SpectralField, a: DampingProfile, lam: float, T: float, dt: float,
               stride: int = 1) -> Trajectory:
    """Evolve the feedback-damped system (phi = 1, no source)."""
    return evolve(u0, EvolutionParams(T=T, dt=dt, lam=lam, damping=a, stride=stride))


@dataclass(frozen=True)
class DecayReport:
    gamma: float
    C: float
    fit_residual: float
    window: tuple

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "C": self.C, "fit_residual": self.fit_residual,
                "window": list(self.window)}


def fit_decay_rate(traj: Trajectory, window: tuple | None = None) -> DecayReport:
    """Least-squares fit  log ||u(t)|| = log(C ||u0||) - gamma t  over ``window``.

    ``fit_residual`` is the RMS deviation of log ||u|| from the fitted line.
    """
    t = traj.times
    lo, hi = (t[0], t[-1]) if window is None else window
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if np.count_nonzero(sel) < 10:
        raise InvalidArgument(f"need >= 10 snapshots in window ({lo}, {hi}), got {np.count_nonzero(sel)}")
    m = traj.masses()
    if m[0] <= 0 or np.any(m[sel] <= 0):
        raise InvalidArgument("mass vanishes inside the fit window")
    y = 0.5 * np.log(m[sel])
    slope, intercept = np.polyfit(t[sel], y, 1)
    resid = y - (slope * t[sel] + intercept)
    return DecayReport(
        gamma=float(-slope),
        C=float(np.exp(intercept) / np.sqrt(m[0])),
        fit_residual=float(np.sqrt(np.mean(resid ** 2))),
        window=(float(lo), float(hi)),
    )


@dataclass
class ObservabilityReport:
    """Per-member ratios ||u0||^2 / int_0^T ||a u||^2 dt and their maximum.

    ``failures`` lists ensemble indices whose observed integral was not
    positive; these are candidates for a failure of observability and make
    ``constant`` infinite.
    """

    masses: np.ndarray
    integrals: np.ndarray
    ratios: np.ndarray
    failures: list = field(default_factory=list)

    @property
    def constant(self) -> float:
        if self.failures:
            return float("inf")
        return float(np.max(self.ratios))

    def __float__(self):
        return self.constant

    def rows(self):
        for i, (m, q, r) in enumerate(zip(self.masses, self.integrals, self.ratios)):
            yield {"member_id": i, "mass0": float(m), "integral": float(q), "ratio": float(r)}


def _stack(ensemble) -> tuple[TorusGrid, np.ndarray]:
    ensemble = list(ensemble)
    if not ensemble:
        raise InvalidArgument("ensemble is empty")
    grid = ensemble[0].grid
    if any(u.grid != grid for u in ensemble):
        raise InvalidArgument("ensemble members live on different grids")
    return grid, np.stack([u.coeffs for u in ensemble])


def damped_integrals(grid: TorusGrid, params: EvolutionParams, uh: np.ndarray,
                     weight: np.ndarray) -> np.ndarray:
    """Trapezoid integral of phi^2 ||weight * u||^2 along runs started from ``uh``."""
    nodes = time_nodes(params.T, params.dt)
    w = trapezoid_weights(nodes)
    w2 = weight ** 2
    cutoff = params.cutoff
    acc = np.zeros(uh.shape[0])

    def on_node(i, t, vh):
        x = np.fft.ifft(vh, axis=-1) * grid.n_modes
        p = np.mean(w2 * np.abs(x) ** 2, axis=-1)
        if cutoff is not None:
            p = p * float(cutoff(t)) ** 2
        acc[:] += w[i] * p

    integrate(grid, params, uh, on_node)
    return acc


def _report(uh, integrals) -> ObservabilityReport:
    masses = np.sum(np.abs(uh) ** 2, axis=1)
    if np.any(masses == 0):
        raise InvalidArgument("ensemble contains a zero state")
    failures = [int(i) for i in np.flatnonzero(~(integrals > 0))]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(integrals > 0, masses / np.where(integrals > 0, integrals, 1.0), np.inf)
    return ObservabilityReport(masses, integrals, ratios, failures)


def observability_constant(ensemble, a: DampingProfile, lam: float, T: float,
                           dt: float) -> ObservabilityReport:
    """Empirical gamma in ||u0||^2 <= gamma int_0^T ||a u||^2 dt along damped runs.

    The maximum over a finite ensemble is only a lower bound for the true
    constant.
    """
    grid, uh = _stack(ensemble)
    params = EvolutionParams(T=T, dt=dt, lam=lam, damping=a)
    return _report(uh, damped_integrals(grid, params, uh, a.samples(grid)))
