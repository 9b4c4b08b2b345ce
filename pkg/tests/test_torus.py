import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fourthnls import (InvalidArgument, SpectralField, TorusGrid, dispersion_symbol,
                       fractional_derivative, make_grid, mass, resample, sobolev_norm)
from fourthnls.torus import japanese_bracket, l2_norm

even_n = st.integers(4, 64).map(lambda h: 2 * h)


def random_field(grid, rng, scale=1.0):
    c = rng.standard_normal(grid.n_modes) + 1j * rng.standard_normal(grid.n_modes)
    return SpectralField(grid, scale * c)


def test_grid_layout_small():
    g = make_grid(8)
    assert sorted(g.wavenumbers.tolist()) == list(range(-4, 4))


def test_grid_spacing():
    g = make_grid(128)
    assert len(g.points) == 128
    assert np.allclose(np.diff(g.points), 2 * np.pi / 128, rtol=0, atol=1e-15)
    assert g.dx == pytest.approx(2 * np.pi / 128)


@pytest.mark.parametrize("n", [7, 6, 0, -8, 9.0])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(InvalidArgument):
        make_grid(n)


def test_wavenumbers_symmetric_except_nyquist():
    k = set(make_grid(16).wavenumbers.tolist())
    unpaired = [x for x in k if -x not in k]
    assert unpaired == [-8]


@pytest.mark.parametrize("k, expected", [(0, 0), (1, 0), (2, 12), (3, 72)])
def test_dispersion_symbol_values(k, expected):
    assert dispersion_symbol(k) == expected


@given(st.integers(-10_000, 10_000))
def test_dispersion_symbol_even(k):
    assert dispersion_symbol(k) == dispersion_symbol(-k)


def test_fractional_derivative_examples():
    g = make_grid(16)
    u = SpectralField.mode(g, 2, 1.0)
    assert np.allclose(fractional_derivative(u, 0).coeffs, u.coeffs)
    assert fractional_derivative(u, -3).coeffs[g.index_of(2)] == pytest.approx(1 / 8)
    const = SpectralField.mode(g, 0, 2.5 - 1j)
    for r in (-2.0, 0.5, 3.0):
        assert np.array_equal(fractional_derivative(const, r).coeffs, const.coeffs)


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**32 - 1))
def test_fractional_derivative_composes(r, q, seed):
    g = make_grid(32)
    c = random_field(g, np.random.default_rng(seed)).coeffs.copy()
    c[0] = 0
    u = SpectralField(g, c)
    lhs = fractional_derivative(fractional_derivative(u, q), r).coeffs
    rhs = fractional_derivative(u, r + q).coeffs
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(rhs)


def test_mass_examples(rng):
    g = make_grid(16)
    assert mass(SpectralField.zeros(g)) == 0
    assert mass(SpectralField.mode(g, 3, 2.0)) == pytest.approx(4.0)


@given(even_n, st.integers(0, 2**32 - 1))
def test_parseval_against_quadrature(n, seed):
    g = make_grid(n)
    u = random_field(g, np.random.default_rng(seed))
    x = u.to_physical()
    # trapezoid rule on the periodic grid of |u|^2 / 2pi
    quad = np.sum(np.abs(x) ** 2) * g.dx / (2 * np.pi)
    assert mass(u) == pytest.approx(quad, rel=1e-10)


@given(even_n, st.integers(0, 2**32 - 1))
def test_round_trip(n, seed):
    g = make_grid(n)
    u = random_field(g, np.random.default_rng(seed))
    back = SpectralField.from_physical(g, u.to_physical())
    assert np.linalg.norm(back.coeffs - u.coeffs) <= 1e-12 * np.linalg.norm(u.coeffs)


def test_sobolev_norm_examples(rng):
    g = make_grid(32)
    u = random_field(g, rng)
    assert sobolev_norm(u, 0) == pytest.approx(np.sqrt(mass(u)))
    assert sobolev_norm(SpectralField.mode(g, 1, 1.0), 1) == pytest.approx(np.sqrt(2))
    oracle = np.sqrt(sum((1 + k * k) ** 2 * abs(c) ** 2 for k, c in zip(g.wavenumbers, u.coeffs)))
    assert sobolev_norm(u, 2) == pytest.approx(oracle, rel=1e-12)


def test_japanese_bracket():
    assert japanese_bracket(0) == 1
    assert japanese_bracket(-3) == pytest.approx(np.sqrt(10))


def test_field_validation():
    g = make_grid(8)
    with pytest.raises(InvalidArgument):
        SpectralField(g, np.zeros(7))
    bad = np.zeros(8, complex)
    bad[2] = np.nan
    with pytest.raises(InvalidArgument):
        SpectralField(g, bad)
    with pytest.raises(InvalidArgument):
        SpectralField.mode(g, 4)


def test_field_is_immutable_copy():
    g = make_grid(8)
    c = np.ones(8, complex)
    u = SpectralField(g, c)
    c[0] = 5
    assert u.coeffs[0] == 1
    with pytest.raises(ValueError):
        u.coeffs[0] = 2


def test_arithmetic_and_grid_mismatch(rng):
    g = make_grid(16)
    u, v = random_field(g, rng), random_field(g, rng)
    assert np.allclose((u + v - v).coeffs, u.coeffs)
    assert np.allclose((2 * u).coeffs, (u * 2).coeffs)
    assert np.allclose((-u).coeffs, -u.coeffs)
    with pytest.raises(InvalidArgument):
        u + SpectralField.zeros(make_grid(8))


@given(st.integers(0, 2**32 - 1))
def test_conj_matches_physical_conjugate(seed):
    g = make_grid(16)
    u = random_field(g, np.random.default_rng(seed))
    assert np.allclose(u.conj().to_physical(), np.conj(u.to_physical()), atol=1e-12)


def test_resample_preserves_resolved_modes(rng):
    coarse = make_grid(16)
    u = random_field(coarse, rng).coeffs.copy()
    u[coarse.index_of(-8)] = 0
    u = SpectralField(coarse, u)
    fine = resample(u, TorusGrid(64))
    assert mass(fine) == pytest.approx(mass(u))
    assert np.allclose(resample(fine, coarse).coeffs, u.coeffs)
    assert l2_norm(u) == pytest.approx(np.sqrt(mass(u)))


def test_dealias_mask():
    g = make_grid(12)
    kept = sorted(g.wavenumbers[g.dealias_mask].tolist())
    assert kept == [-4, -3, -2, -1, 0, 1, 2, 3, 4]
