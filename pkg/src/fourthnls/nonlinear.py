"""Nonlinear control: local null control by Picard iteration, global steering.

Local control looks for g = a^2 phi^2 E(t) Phi0. Splitting the solution of
the controlled equation (terminal state 0) as u = v + Psi with Psi the
linear HUM part gives u(0) = K Phi0 + R Phi0, so hitting u(0) = u0 is the
fixed-point problem

    Phi0 = -R^{-1} K Phi0 + R^{-1} u0.

Backward-in-time solves go through the forward stepper: if u solves the
equation with forcing f, then conj(u(T - t)) solves it with forcing
conj(f(T - t)).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dynamics import EvolutionParams, Trajectory, integrate, time_nodes
from .errors import (AccuracyError, BlowUpError, InvalidArgument, NonConvergenceError,
                     NonlinearFailure, StabilizationTimeout)
from .hum import AdjointControl, ControlOperator
from .torus import SpectralField, TorusGrid, l2_norm, mass

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-2


def _conj_coeffs(ch):
    return np.conj(np.roll(ch[..., ::-1], 1, axis=-1))


class _ReversedSource:
    """s -> conj(f(T - s))."""

    def __init__(self, f, T):
        self.f, self.T = f, T

    def __call__(self, s):
        return np.conj(self.f(self.T - s))


def _backward_initial(grid: TorusGrid, forcing, lam: float, nodes: np.ndarray) -> np.ndarray:
    """u(t_0) for the forced equation with u(t_end) = 0, by conjugate reversal."""
    T = nodes[-1]
    s_nodes = T - nodes[::-1]
    s_nodes[0] = 0.0
    params = EvolutionParams(T=T, dt=max(np.max(np.diff(nodes)), 1e-300), lam=lam,
                             source=_ReversedSource(forcing, T))
    w = integrate(grid, params, np.zeros(grid.n_modes, dtype=np.complex128), nodes=s_nodes)
    return _conj_coeffs(w)


def apply_K(phi0: SpectralField, R: ControlOperator, lam: float, T: float | None = None,
            dt: float | None = None) -> SpectralField:
    """Nonlinear correction K Phi0 = v(0).

    u solves the nonlinear equation with forcing a^2 phi^2 E(t) Phi0 and
    u(T) = 0, Psi the linear equation with the same forcing and Psi(T) = 0;
    v = u - Psi is the solution of i v_t + L v = lam |u|^2 u, v(T) = 0.
    Both backward solves share one code path, so lam = 0 gives exactly 0.
    """
    T = R.T if T is None else T
    dt = R.dt if dt is None else dt
    nodes = time_nodes(T, dt)
    control = AdjointControl(phi0, R.damping, R.cutoff)
    psi0 = _backward_initial(phi0.grid, control, 0.0, nodes)
    if lam == 0:
        return SpectralField(phi0.grid, psi0 - psi0)
    try:
        u0 = _backward_initial(phi0.grid, control, lam, nodes)
    except BlowUpError as exc:
        raise NonlinearFailure(f"backward nonlinear solve failed: {exc}") from exc
    return SpectralField(phi0.grid, u0 - psi0)


@dataclass(frozen=True)
class PicardState:
    phi0: SpectralField
    iterate_index: int
    update_norm: float
    history: tuple


def picard_states(u0: SpectralField, R: ControlOperator, lam: float, T: float | None = None,
                  dt: float | None = None):
    """Endless generator of Picard iterates starting from Phi = R^{-1} u0."""
    T = R.T if T is None else T
    dt = R.dt if dt is None else dt
    phi = R.solve(u0)
    history = ()
    while True:
        new = R.solve(u0 - apply_K(phi, R, lam, T, dt))
        history = history + (l2_norm(new - phi),)
        phi = new
        yield PicardState(phi, len(history), history[-1], history)


@dataclass(frozen=True, eq=False)
class PicardResult:
    phi0: SpectralField
    control: AdjointControl
    trajectory: Trajectory
    iterations: int
    history: list
    terminal_residual: float

    @property
    def contraction_ratio(self) -> float:
        """Ratio of the first two update norms (nan with fewer than two)."""
        h = self.history
        if len(h) < 2 or h[0] == 0:
            return float("nan")
        return h[1] / h[0]


def forward_controlled(u0: SpectralField, control, lam: float, T: float, dt: float,
                       stride: int = 1) -> Trajectory:
    nodes = time_nodes(T, dt)
    params = EvolutionParams(T=T, dt=dt, lam=lam, source=control)
    keep_t, keep_u = [], []
    last = len(nodes) - 1

    def record(i, t, uh):
        if i % stride == 0 or i == last:
            keep_t.append(t)
            keep_u.append(uh.copy())

    integrate(u0.grid, params, u0.coeffs, record)
    return Trajectory(u0.grid, np.array(keep_t), np.array(keep_u), params)


def picard_iterate(u0: SpectralField, R: ControlOperator, lam: float, T: float | None = None,
                   dt: float | None = None, tol: float = 1e-10, max_iter: int = 50,
                   epsilon: float | None = DEFAULT_EPSILON, stride: int = 1) -> PicardResult:
    """Iterate Phi <- R^{-1}(u0 - K Phi) from Phi = R^{-1} u0 until the update is below ``tol``.

    The iteration is stopped early (with :class:`NonConvergenceError`) as
    soon as an update is not smaller than the first one, or when the
    backward solve blows up. The returned trajectory is the forward nonlinear run
    from ``u0`` under the synthesized control; its terminal residual
    ||u(T)|| / ||u0|| must not exceed ``10 * tol``.
    """
    T = R.T if T is None else T
    dt = R.dt if dt is None else dt
    norm0 = l2_norm(u0)
    if epsilon is not None and norm0 > epsilon:
        log.warning("||u0|| = %.3g exceeds the local-control threshold %.3g", norm0, epsilon)
    states = picard_states(u0, R, lam, T, dt)
    history = []
    for n in range(1, max_iter + 1):
        try:
            state = next(states)
        except NonlinearFailure as exc:
            raise NonConvergenceError(f"Picard map failed at iteration {n}: {exc}", history) from exc
        update = state.update_norm
        history = list(state.history)
        phi = state.phi0
        log.debug("picard %d: update %.3e", n, update)
        if not np.isfinite(update):
            raise NonConvergenceError(f"non-finite update at iteration {n}", history)
        if update < tol:
            break
        # a contraction has h_n <= q^n h_0 < h_0
        if n >= 2 and update >= history[0]:
            raise NonConvergenceError(
                f"Picard map is not contracting: update {update:.3e} >= first update "
                f"{history[0]:.3e} at iteration {n}", history)
    else:
        raise NonConvergenceError(f"no convergence within {max_iter} iterations", history)

    control = AdjointControl(phi, R.damping, R.cutoff)
    try:
        traj = forward_controlled(u0, control, lam, T, dt, stride)
    except BlowUpError as exc:
        raise NonConvergenceError(f"controlled forward run blew up: {exc}", history) from exc
    residual = 0.0 if norm0 == 0 else l2_norm(traj.final) / norm0
    if residual > 10 * tol:
        raise AccuracyError("nonlinear control misses zero", residual,
                            {"iterations": len(history), "history": history})
    return PicardResult(phi, control, traj, len(history), history, residual)


def fixed_point_defect(result: PicardResult, u0: SpectralField, R: ControlOperator,
                       lam: float) -> float:
    """||Phi0 + R^{-1} K Phi0 - R^{-1} u0|| at the returned Phi0."""
    k = apply_K(result.phi0, R, lam)
    return l2_norm(result.phi0 + R.solve(k) - R.solve(u0))


# ---------------------------------------------------------------------------
# Global steering


@dataclass(frozen=True, eq=False)
class SampledControl:
    """Control values g(x_j, t_m) on a (time, space) grid."""

    grid: TorusGrid
    times: np.ndarray
    values: np.ndarray

    def concat(self, other: SampledControl) -> SampledControl:
        """Append ``other``; at a shared node the later piece's value is kept."""
        start = 1 if len(self.times) and np.isclose(other.times[0], self.times[-1], atol=1e-12) else 0
        return SampledControl(self.grid, np.concatenate([self.times[:len(self.times) - start], other.times]),
                              np.concatenate([self.values[:len(self.values) - start], other.values]))

    def shifted(self, t0: float) -> SampledControl:
        return SampledControl(self.grid, self.times + t0, self.values)

    def reversed_conjugate(self) -> SampledControl:
        """t -> conj(g(T - t)) on the mirrored node set."""
        T = self.times[-1]
        times = T - self.times[::-1]
        times[0] = 0.0
        return SampledControl(self.grid, times, np.conj(self.values[::-1]))

    def sup_l2(self) -> float:
        return float(np.max(np.sqrt(np.mean(np.abs(self.values) ** 2, axis=1)))) if len(self.times) else 0.0


@dataclass(frozen=True, eq=False)
class SteeringResult:
    control: SampledControl
    trajectory: Trajectory
    terminal_error: float
    stab_horizon_start: float
    stab_horizon_target: float
    phases: list = field(default_factory=list)


def _run_recorded(grid, params, uh, nodes, feedback_sign=None, source=None):
    """Integrate on ``nodes`` and return (trajectory, control samples)."""
    ts, us, gs = [], [], []
    a2 = None if params.damping is None else params.damping.samples(grid) ** 2

    def record(i, t, vh):
        ts.append(t)
        us.append(vh.copy())
        if feedback_sign is not None:
            gs.append(-1j * feedback_sign * a2 * grid.to_physical(vh))
        elif source is not None:
            gs.append(source(t))
        else:
            gs.append(np.zeros(grid.n_modes, dtype=np.complex128))

    integrate(grid, params, uh, record, nodes=nodes)
    times = np.array(ts)
    return Trajectory(grid, times, np.array(us), params), SampledControl(grid, times, np.array(gs))


def _stabilize(u: SpectralField, R: ControlOperator, lam: float, dt: float, threshold: float,
               max_horizon: float, window: float):
    """Damped runs in windows of length ``window`` until mass < threshold^2.

    Returns ((trajectory, feedback control) or None, node array).
    """
    grid = u.grid
    params = EvolutionParams(T=window, dt=dt, lam=lam, damping=R.damping)
    local = time_nodes(window, dt)
    traj = ctrl = None
    uh, t = u.coeffs, 0.0
    while np.sum(np.abs(uh) ** 2) >= threshold ** 2:
        if t >= max_horizon - 1e-12:
            raise StabilizationTimeout(
                f"mass {np.sum(np.abs(uh) ** 2):.3e} still above {threshold ** 2:.3e} at t={t:g}",
                t, float(np.sum(np.abs(uh) ** 2)))
        seg, seg_ctrl = _run_recorded(grid, params, uh, t + local, feedback_sign=1.0)
        traj = seg if traj is None else traj.concat(seg)
        ctrl = seg_ctrl if ctrl is None else ctrl.concat(seg_ctrl)
        uh, t = seg.coeffs[-1], t + window
    if traj is None:
        return None, np.array([0.0])
    return (traj, ctrl), traj.times.copy()


def steer_to_state(u0: SpectralField, u1: SpectralField, R: ControlOperator, lam: float,
                   T: float | None = None, dt: float | None = None, tol: float = 1e-10,
                   epsilon: float = DEFAULT_EPSILON, max_horizon: float = 200.0,
                   window: float = 1.0, max_iter: int = 50, r0: float | None = None) -> SteeringResult:
    """Steer u0 to u1: damp u0 into the local ball, null-control it, then replay
    the damp-and-control path of conj(u1) conjugated and reversed in time.

    The replay is re-simulated forward (open-loop control for the local
    part, anti-damping feedback i a^2 u for the stabilization part), so the
    reported terminal error is that of an actual run, not of bookkeeping.
    """
    T = R.T if T is None else T
    dt = R.dt if dt is None else dt
    if u0.grid != R.grid or u1.grid != R.grid:
        raise InvalidArgument("states and control operator must share a grid")
    if r0 is not None and max(l2_norm(u0), l2_norm(u1)) > r0:
        raise InvalidArgument(f"states exceed the configured radius R0={r0}")
    grid = R.grid
    phases = []

    # phases 1 + 2 for u0
    stab0, nodes0 = _stabilize(u0, R, lam, dt, epsilon, max_horizon, window)
    if stab0 is None:
        traj = Trajectory(grid, [0.0], [u0.coeffs])
        control = SampledControl(grid, np.array([0.0]), np.zeros((1, grid.n_modes), complex))
    else:
        traj, control = stab0
    phases.append(("stabilize", 0.0, float(nodes0[-1])))
    small = traj.final
    local = picard_iterate(small, R, lam, T, dt, tol, max_iter, epsilon=None)
    t_off = traj.times[-1]
    traj = traj.concat(local.trajectory.shifted(t_off))
    local_ctrl = SampledControl(grid, local.trajectory.times, local.control.sample(local.trajectory.times))
    control = control.concat(local_ctrl.shifted(t_off))
    phases.append(("local-control", float(t_off), float(t_off + T)))

    horizon1 = 0.0
    if mass(u1) > 0:
        z0 = u1.conj()
        stab1, nodes1 = _stabilize(z0, R, lam, dt, epsilon, max_horizon, window)
        horizon1 = float(nodes1[-1])
        z_small = z0 if stab1 is None else stab1[0].final
        local1 = picard_iterate(z_small, R, lam, T, dt, tol, max_iter, epsilon=None)

        # reversed local segment: forcing conj(g(T - t)) on mirrored nodes
        t_off = traj.times[-1]
        nodes = time_nodes(T, dt)
        rnodes = T - nodes[::-1]
        rnodes[0] = 0.0
        rsource = _ReversedSource(local1.control, T)
        params = EvolutionParams(T=T, dt=dt, lam=lam, source=rsource)
        seg, seg_ctrl = _run_recorded(grid, params, traj.final.coeffs, rnodes, source=rsource)
        traj = traj.concat(seg.shifted(t_off))
        control = control.concat(seg_ctrl.shifted(t_off))
        phases.append(("reverse-local", float(t_off), float(t_off + T)))

        if stab1 is not None:
            t_off = traj.times[-1]
            rnodes = horizon1 - nodes1[::-1]
            rnodes[0] = 0.0
            params = EvolutionParams(T=horizon1, dt=dt, lam=lam, damping=R.damping, damping_sign=-1.0)
            seg, seg_ctrl = _run_recorded(grid, params, traj.final.coeffs, rnodes, feedback_sign=-1.0)
            traj = traj.concat(seg.shifted(t_off))
            control = control.concat(seg_ctrl.shifted(t_off))
            phases.append(("reverse-stabilize", float(t_off), float(t_off + horizon1)))

    err = l2_norm(traj.final - u1) / max(l2_norm(u1), 1.0)
    if err > 10 * tol and err > 1e-4:
        log.warning("steering terminal error %.3e", err)
    return SteeringResult(control, traj, err, float(nodes0[-1]), horizon1, phases)
