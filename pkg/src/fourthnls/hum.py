"""Linear exact control through the HUM operator.

For the free flow E(t) = e^{it(d_xx - d_xxxx)} the control operator is

    R Phi0 = i int_0^T E(-t) phi(t)^2 a(x)^2 E(t) Phi0 dt,

the initial state that the linear system i Psi_t + L Psi = a^2 phi^2 E(t) Phi0
drives to zero at time T. It is assembled on the solver's own modes and
time nodes, so the stepper in :mod:`fourthnls.dynamics` reproduces it to
rounding error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .dynamics import EvolutionParams, evolve, time_nodes, trapezoid_weights
from .errors import AccuracyError, InvalidArgument, NoControlError
from .profiles import CutoffProfile, DampingProfile
from .stabilization import ObservabilityReport, _report, _stack, damped_integrals
from .torus import SpectralField, TorusGrid, free_frequency, japanese_bracket, l2_norm, resample

__all__ = [
    "CutoffProfile", "ControlOperator", "AdjointControl", "IsomorphismReport",
    "LinearControlResult", "assemble_control_operator", "verify_isomorphism",
    "check_linear_observability", "solve_linear_control", "spillover_residual",
]

SINGULAR_RTOL = 1e-13


@dataclass(frozen=True, eq=False)
class ControlOperator:
    """Dense matrix of R in the Fourier basis (FFT ordering) plus provenance."""

    matrix: np.ndarray
    grid: TorusGrid
    damping: DampingProfile
    cutoff: CutoffProfile
    dt: float

    @property
    def T(self) -> float:
        return self.cutoff.T

    @cached_property
    def hermitian_defect(self) -> float:
        """||H - H*|| / ||R|| for H = -iR (Frobenius norms); 0 for R = 0."""
        h = -1j * self.matrix
        scale = np.linalg.norm(self.matrix)
        return 0.0 if scale == 0 else float(np.linalg.norm(h - h.conj().T) / scale)

    @cached_property
    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.matrix, compute_uv=False)

    @cached_property
    def condition_number(self) -> float:
        sv = self.singular_values
        return float("inf") if sv[-1] <= SINGULAR_RTOL * sv[0] or sv[0] == 0 else float(sv[0] / sv[-1])

    @cached_property
    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue of the Hermitian part of -iR."""
        h = -1j * self.matrix
        return float(np.linalg.eigvalsh(0.5 * (h + h.conj().T))[0])

    @property
    def invertible(self) -> bool:
        return np.isfinite(self.condition_number)

    @cached_property
    def _lu(self):
        return scipy.linalg.lu_factor(self.matrix)

    def apply(self, phi0: SpectralField) -> SpectralField:
        self._check_grid(phi0)
        return SpectralField(self.grid, self.matrix @ phi0.coeffs)

    def solve(self, u0: SpectralField) -> SpectralField:
        """Phi0 with R Phi0 = u0 (dense LU)."""
        self._check_grid(u0)
        if not self.invertible:
            raise NoControlError(f"control operator is singular (cond={self.condition_number:.3g})")
        return SpectralField(self.grid, scipy.linalg.lu_solve(self._lu, u0.coeffs))

    def _check_grid(self, u):
        if u.grid != self.grid:
            raise InvalidArgument(f"field on N={u.grid.n_modes}, operator on N={self.grid.n_modes}")

    def metadata(self) -> dict:
        return {
            "N": self.grid.n_modes, "T": self.T, "dt": self.dt,
            "damping": self.damping.to_dict(), "cutoff": self.cutoff.to_dict(),
            "condition_number": self.condition_number,
            "hermitian_defect": self.hermitian_defect,
            "min_eigenvalue": self.min_eigenvalue,
        }


def assemble_control_operator(a: DampingProfile, phi: CutoffProfile, grid: TorusGrid,
                              dt: float) -> ControlOperator:
    """Column sweep: propagate e_j, multiply by phi^2 a^2, propagate back, integrate.

    All N basis vectors are swept together; the time integral is the
    composite trapezoid rule on ``time_nodes(phi.T, dt)``.
    """
    if not 0 < dt <= phi.T:
        raise InvalidArgument(f"dt={dt} must lie in (0, T={phi.T}]")
    n = grid.n_modes
    omega = free_frequency(grid.wavenumbers)
    a2 = a.samples(grid) ** 2
    nodes = time_nodes(phi.T, dt)
    weights = trapezoid_weights(nodes) * phi(nodes) ** 2
    basis = np.eye(n, dtype=np.complex128)  # row j is e_j
    acc = np.zeros((n, n), dtype=np.complex128)
    if np.any(a2):
        for t, w in zip(nodes, weights):
            if w == 0:
                continue
            rot = np.exp(1j * omega * t)
            x = np.fft.ifft(basis * rot, axis=-1) * n
            acc += w * (np.fft.fft(a2 * x, axis=-1) / n) * rot.conj()
    return ControlOperator(1j * acc.T, grid, a, phi, dt)


@dataclass(frozen=True)
class IsomorphismReport:
    """Conditioning of W_s R W_s^{-1}, W_s = diag(<k>^s), for one s.

    ``inverse_norm`` is ||R^{-1}|| on L^2 and ``commutator_constant`` the
    norm of [W_s, R^{-1}] W_{s-1}^{-1}; together they give
    ||R^{-1} Psi||_{H^s} <= inverse_norm ||Psi||_{H^s} + commutator_constant ||Psi||_{H^{s-1}}.
    """

    s: float
    sigma_min: float
    sigma_max: float
    invertible: bool
    inverse_norm: float
    commutator_constant: float

    @property
    def margin(self) -> float:
        return 0.0 if self.sigma_max == 0 else self.sigma_min / self.sigma_max


def verify_isomorphism(R: ControlOperator, s_list) -> list[IsomorphismReport]:
    jb = japanese_bracket(R.grid.wavenumbers)
    reports = []
    for s in s_list:
        ws = jb ** s
        conj = (ws[:, None] * R.matrix) / ws[None, :]
        sv = np.linalg.svd(conj, compute_uv=False)
        ok = sv[0] > 0 and sv[-1] > SINGULAR_RTOL * sv[0]
        if ok:
            rinv = np.linalg.inv(R.matrix)
            comm = (ws[:, None] * rinv - rinv * ws[None, :]) / (jb ** (s - 1))[None, :]
            inv_norm = float(np.linalg.norm(rinv, 2))
            comm_norm = float(np.linalg.norm(comm, 2))
        else:
            inv_norm = comm_norm = float("inf")
        reports.append(IsomorphismReport(float(s), float(sv[-1]), float(sv[0]), bool(ok),
                                         inv_norm, comm_norm))
    return reports


def check_linear_observability(ensemble, a: DampingProfile, phi: CutoffProfile, T: float,
                               dt: float) -> ObservabilityReport:
    """Empirical constant C in ||Psi0||^2 <= C int_0^T ||a phi E(t) Psi0||^2 dt."""
    grid, uh = _stack(ensemble)
    params = EvolutionParams(T=T, dt=dt, cutoff=phi)
    return _report(uh, damped_integrals(grid, params, uh, a.samples(grid)))


@dataclass(frozen=True, eq=False)
class AdjointControl:
    """g(x, t) = a(x)^2 phi(t)^2 (E(t) Phi0)(x), evaluated on the grid."""

    phi0: SpectralField
    damping: DampingProfile
    cutoff: CutoffProfile
    _a2: np.ndarray = field(init=False, repr=False)
    _omega: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        grid = self.phi0.grid
        object.__setattr__(self, "_a2", self.damping.samples(grid) ** 2)
        object.__setattr__(self, "_omega", free_frequency(grid.wavenumbers))

    @property
    def grid(self) -> TorusGrid:
        return self.phi0.grid

    def __call__(self, t: float) -> np.ndarray:
        amp = float(self.cutoff(t)) ** 2
        if amp == 0:
            return np.zeros(self.grid.n_modes, dtype=np.complex128)
        x = self.grid.to_physical(self.phi0.coeffs * np.exp(1j * self._omega * t))
        return self._a2 * amp * x

    def sample(self, times) -> np.ndarray:
        return np.array([self(t) for t in np.asarray(times, dtype=float)])


@dataclass(frozen=True, eq=False)
class LinearControlResult:
    phi0: SpectralField
    control: AdjointControl
    terminal_residual: float


def _linear_terminal(u0: SpectralField, control, T: float, dt: float) -> SpectralField:
    return evolve(u0, EvolutionParams(T=T, dt=dt, source=control, stride=10 ** 9)).final


def solve_linear_control(u0: SpectralField, R: ControlOperator, tol: float = 1e-6) -> LinearControlResult:
    """Solve R Phi0 = u0 and verify that g = a^2 phi^2 E(t) Phi0 steers u0 to 0."""
    phi0 = R.solve(u0)
    control = AdjointControl(phi0, R.damping, R.cutoff)
    norm0 = l2_norm(u0)
    if norm0 == 0:
        return LinearControlResult(phi0, control, 0.0)
    final = _linear_terminal(u0, control, R.T, R.dt)
    residual = l2_norm(final) / norm0
    if residual > tol:
        raise AccuracyError("linear control misses zero", residual,
                            {"condition_number": R.condition_number})
    return LinearControlResult(phi0, control, residual)


def spillover_residual(u0: SpectralField, R: ControlOperator, phi0: SpectralField,
                       factor: int = 2) -> float:
    """Terminal residual when the truncated control acts on a ``factor``-times finer grid."""
    fine = TorusGrid(R.grid.n_modes * factor)
    control = AdjointControl(resample(phi0, fine), R.damping, R.cutoff)
    u_fine = resample(u0, fine)
    final = _linear_terminal(u_fine, control, R.T, R.dt)
    return l2_norm(final) / l2_norm(u_fine)
