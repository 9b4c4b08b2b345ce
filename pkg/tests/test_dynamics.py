import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fourthnls import (BlowUpError, CutoffProfile, DampingProfile, EvolutionParams,
                       InvalidArgument, SpectralField, Trajectory, evolve, free_propagate,
                       make_grid, mass, mass_balance_residual, step_strang)
from fourthnls.dynamics import damped_power, time_nodes, trapezoid_weights
from fourthnls.rng import random_field, stream
from fourthnls.torus import l2_norm


def three_mode(grid, amp=0.5):
    c = np.zeros(grid.n_modes, complex)
    c[grid.index_of(1)] = amp
    c[grid.index_of(-2)] = 0.5j * amp
    c[grid.index_of(3)] = 0.25 * amp
    return SpectralField(grid, c)


@given(st.floats(-50, 50), st.integers(0, 2**32 - 1))
def test_free_flow_is_unitary(t, seed):
    u = random_field(make_grid(64), stream(seed, "t"), decay=0.0, kmax=31)
    assert mass(free_propagate(u, t)) == pytest.approx(mass(u), rel=1e-13)


def test_free_flow_identity_and_group():
    u = random_field(make_grid(32), stream(1, "g"))
    assert np.array_equal(free_propagate(u, 0.0).coeffs, u.coeffs)
    a = free_propagate(free_propagate(u, 0.37), 1.21).coeffs
    b = free_propagate(u, 1.58).coeffs
    assert np.linalg.norm(a - b) <= 1e-12 * np.linalg.norm(b)


def test_free_flow_plane_wave_frequency():
    g = make_grid(16)
    u = SpectralField.mode(g, 2, 1.0)
    out = free_propagate(u, 0.1).coeffs[g.index_of(2)]
    assert out == pytest.approx(np.exp(-1j * (4 + 16) * 0.1))


def test_step_without_nonlinearity_is_free_flow():
    u = random_field(make_grid(32), stream(2, "s"))
    v = step_strang(u, 0.01, EvolutionParams(T=1, dt=0.01))
    assert np.allclose(v.coeffs, free_propagate(u, 0.01).coeffs, rtol=0, atol=1e-12)


def test_step_mass_defect_is_small():
    g = make_grid(64)
    u = three_mode(g)
    p = EvolutionParams(T=1, dt=1e-2, lam=1.0)
    for dt in (1e-2, 5e-3):
        assert abs(mass(step_strang(u, dt, p)) - mass(u)) < dt ** 3


def test_step_validation():
    u = three_mode(make_grid(16))
    with pytest.raises(InvalidArgument):
        step_strang(u, 0.0, EvolutionParams(T=1, dt=0.1))


@pytest.mark.parametrize("kw", [dict(T=0, dt=0.1), dict(T=1, dt=-1), dict(T=1, dt=2),
                                dict(T=float("nan"), dt=0.1), dict(T=1, dt=0.1, stride=0)])
def test_params_validation(kw):
    with pytest.raises(InvalidArgument):
        EvolutionParams(**kw)


def test_linear_evolve_matches_free_flow():
    u = random_field(make_grid(32), stream(3, "e"))
    traj = evolve(u, EvolutionParams(T=2.0, dt=1e-2))
    assert np.allclose(traj.final.coeffs, free_propagate(u, 2.0).coeffs, rtol=0, atol=1e-10)
    assert traj.times[0] == 0 and traj.times[-1] == 2.0
    assert len(traj) == 201


def test_nonlinear_mass_conservation_small_data():
    u = random_field(make_grid(64), stream(4, "m"), mass=1e-2)
    m = evolve(u, EvolutionParams(T=1, dt=1e-3, lam=1.0, stride=100)).masses()
    assert abs(m[-1] - m[0]) / m[0] <= 1e-8


def test_stride_keeps_final_node():
    u = three_mode(make_grid(16))
    traj = evolve(u, EvolutionParams(T=0.105, dt=0.01, stride=4))
    assert traj.times[-1] == pytest.approx(0.105)
    assert np.allclose(traj.times[:-1], [0.0, 0.04, 0.08])


def test_time_nodes_and_weights():
    nodes = time_nodes(1.0, 0.3)
    assert nodes[-1] == 1.0 and len(nodes) == 5
    w = trapezoid_weights(nodes)
    assert w.sum() == pytest.approx(1.0)
    assert np.allclose(time_nodes(1.0, 0.25), [0, 0.25, 0.5, 0.75, 1.0])


def _orders(u0, dts, lam=1.0):
    ref = evolve(u0, EvolutionParams(T=1, dt=dts[-1] / 16, lam=lam, stride=10 ** 9)).final
    errs = [l2_norm(evolve(u0, EvolutionParams(T=1, dt=dt, lam=lam, stride=10 ** 9)).final - ref)
            for dt in dts]
    return np.diff(np.log(errs)) / np.diff(np.log(dts))


def test_second_order_convergence():
    g = make_grid(128)
    rng = np.random.default_rng(0)
    c = np.zeros(g.n_modes, complex)
    for k in (-1, 1, 2):
        c[g.index_of(k)] = rng.normal() + 1j * rng.normal()
    u0 = SpectralField(g, c / np.linalg.norm(c))
    orders = _orders(u0, [4e-3, 2e-3, 1e-3])
    assert np.all((orders >= 1.8) & (orders <= 2.2)), orders


def test_second_order_asymptotic_with_faster_mode():
    # |w(3)| dt = 0.36 at dt = 4e-3, so the coarse pairs are pre-asymptotic
    orders = _orders(three_mode(make_grid(64), amp=1.0), [1e-3, 5e-4, 2.5e-4])
    assert 1.8 <= orders[-1] <= 2.2, orders


def test_conjugate_time_reversal():
    g = make_grid(64)
    u0 = random_field(g, stream(5, "rev"), mass=1.0, kmax=10)
    p = EvolutionParams(T=1, dt=1e-3, lam=1.0, stride=10 ** 9)
    returned = evolve(evolve(u0, p).final.conj(), p).final.conj()
    assert l2_norm(returned - u0) <= 1e-6


def test_flow_map_lipschitz_constant_stable():
    g = make_grid(32)
    u0 = random_field(g, stream(6, "lip"), mass=1.0)
    du = random_field(g, stream(6, "dir"), mass=1.0) * 1e-6
    consts = []
    for dt in (2e-3, 1e-3):
        p = EvolutionParams(T=1, dt=dt, lam=1.0, stride=10 ** 9)
        d = l2_norm(evolve(u0 + du, p).final - evolve(u0, p).final)
        consts.append(d / l2_norm(du))
    assert consts[0] == pytest.approx(consts[1], rel=0.05)
    assert np.isfinite(consts).all()


def test_blow_up_reported_with_time():
    g = make_grid(32)
    u0 = random_field(g, stream(7, "big"), mass=1.0)
    p = EvolutionParams(T=5.0, dt=1e-2, damping=DampingProfile.constant(1.0), damping_sign=-1.0)
    with pytest.raises(BlowUpError) as exc:
        evolve(u0, EvolutionParams(T=20.0, dt=1e-2, damping=p.damping, damping_sign=-1.0))
    assert 0 < exc.value.last_good_time < 20.0


def test_mass_balance_undamped_equals_drift():
    u = random_field(make_grid(64), stream(8, "mb"), mass=1.0, kmax=10)
    traj = evolve(u, EvolutionParams(T=1, dt=1e-3, lam=1.0))
    m = traj.masses()
    r = mass_balance_residual(traj, DampingProfile.zero())
    assert r == pytest.approx(np.max(np.abs(m - m[0])), abs=1e-15)
    assert r <= 1e-8


def test_mass_balance_constant_damping_second_order():
    u = random_field(make_grid(32), stream(9, "mb"), mass=1.0)
    a = DampingProfile.constant(0.8)
    res = [mass_balance_residual(evolve(u, EvolutionParams(T=1, dt=dt, damping=a)), a)
           for dt in (4e-3, 2e-3, 1e-3)]
    orders = np.diff(np.log(res)) / np.log(0.5)
    assert np.all(orders > 1.8), res


def test_mass_balance_localized_with_cutoff():
    u = random_field(make_grid(32), stream(10, "mb"), mass=1.0)
    a = DampingProfile(((0.0, np.pi),))
    phi = CutoffProfile(1.0)
    traj = evolve(u, EvolutionParams(T=1, dt=1e-3, lam=1.0, damping=a, cutoff=phi))
    assert mass_balance_residual(traj, a, phi) <= 1e-6


def test_mass_balance_zero_data_and_grid_check():
    g = make_grid(16)
    traj = evolve(SpectralField.zeros(g), EvolutionParams(T=0.1, dt=0.01, damping=DampingProfile()))
    assert mass_balance_residual(traj, DampingProfile()) == 0.0
    with pytest.raises(InvalidArgument):
        mass_balance_residual(traj, np.ones(8))
    assert damped_power(traj, np.ones(16)).shape == (11,)


def test_trajectory_copies_and_freezes():
    g = make_grid(8)
    times = np.array([0.0, 0.5])
    coeffs = np.zeros((2, 8), complex)
    traj = Trajectory(g, times, coeffs)
    coeffs[0, 0] = 1.0
    assert traj.coeffs[0, 0] == 0
    assert times.flags.writeable
    with pytest.raises(InvalidArgument):
        Trajectory(g, [0.0, 0.0], coeffs)
    joined = traj.concat(traj.shifted(0.5))
    assert np.allclose(joined.times, [0, 0.5, 1.0])


def test_deterministic_runs():
    u = random_field(make_grid(32), stream(11, "det"), mass=1.0)
    p = EvolutionParams(T=0.5, dt=1e-3, lam=1.0, damping=DampingProfile())
    assert np.array_equal(evolve(u, p).coeffs, evolve(u, p).coeffs)
