from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import collision_at_zero, collision_mc
from wicknls.errors import InstabilityError, UnsupportedError, ValidationError
from wicknls.kinetic import (
    GaussianSource,
    KGrid,
    KineticState,
    collision_columns,
    collision_WK,
    collision_WK2,
    initial_E,
    initial_W,
    marginalize_zeta,
    picard_coefficients,
    solve,
    total_mass,
    transport_shift,
)
from wicknls.spectra import InitialProfile, ResonantQuadrature

PROFILE = InitialProfile(amplitude=0.8, k_decay=2.0)
COARSE = ResonantQuadrature(4, 3, 4, 4, 4)
SMALL = ResonantQuadrature(6, 4, 6, 6, 6)
FINE = ResonantQuadrature(16, 8, 12, 16, 12, rcut=4.0)
ORIGIN = np.zeros((1, 3))


def test_exact_gaussian_collision_at_origin():
    src = GaussianSource((0.0, 0.0, 0.0), 2.0, np.array([1.3]))
    val = collision_columns([src, src, src], KGrid(m=5), FINE, targets=ORIGIN)[0, 0]
    assert val == pytest.approx(collision_at_zero(1.3, 2.0), rel=1e-6)


def test_exact_gaussian_collision_within_monte_carlo_error():
    src = GaussianSource((0.0, 0.0, 0.0), 2.0, np.array([1.0]))
    val = collision_columns([src, src, src], KGrid(m=5), FINE, targets=ORIGIN)[0, 0]
    est, se = collision_mc(1.0, 2.0, 1_000_000, seed=3)
    assert abs(val - est) <= 3 * se


@pytest.mark.parametrize("interpolation", ["linear", "cubic"])
def test_gridded_collision_approaches_exact(interpolation):
    grid = KGrid(m=17, k_max=1.5)
    W = initial_W(PROFILE, grid)
    src = GaussianSource.initial(PROFILE, grid)
    q = ResonantQuadrature(10, 6, 8, 10, 8, rcut=3.0)
    exact = collision_columns([src, src, src], grid, q, targets=ORIGIN)[0, 0]
    cols = W.data[..., None]
    approx = collision_columns([cols, cols, cols], grid, q, targets=ORIGIN, interpolation=interpolation)[0, 0]
    tol = 0.1 if interpolation == "linear" else 2e-3
    assert approx == pytest.approx(exact, rel=tol)


def test_collision_of_zero_is_zero():
    grid = KGrid(m=5)
    z = KineticState("W", np.zeros((5, 5, 5)), grid)
    assert np.all(collision_WK(z, COARSE) == 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_linear_collision_keeps_nonnegative_data_nonnegative(seed):
    grid = KGrid(m=5)
    data = np.random.default_rng(seed).uniform(0, 1, (5, 5, 5))
    assert np.all(collision_WK(KineticState("W", data, grid), COARSE) >= 0)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 3.0))
def test_collision_is_cubic_in_data(seed, c):
    grid = KGrid(m=5)
    data = np.random.default_rng(seed).uniform(0, 1, (5, 5, 5))
    a = collision_WK(KineticState("W", data, grid), COARSE)
    b = collision_WK(KineticState("W", c * data, grid), COARSE)
    assert np.allclose(b, c**3 * a, rtol=1e-12, atol=1e-300)


def test_second_microlocal_collision_marginalizes():
    grid = KGrid(m=5, k_max=1.5, zeta_extent=1.6, zeta_points=5)
    E = initial_E(PROFILE, grid)
    W = marginalize_zeta(E)
    direct = collision_WK(W, COARSE)
    for mode in ("periodic", "linear"):
        C2 = collision_WK2(E, COARSE, zeta_mode=mode)
        marg = marginalize_zeta(KineticState("E", C2, grid)).data
        assert np.max(np.abs(marg - direct)) <= 1e-2 * np.max(np.abs(direct))


def test_marginal_of_initial_wigner_is_density():
    grid = KGrid(m=5, k_max=1.5, zeta_extent=3.0, zeta_points=25)
    E = initial_E(PROFILE, grid)
    W = initial_W(PROFILE, grid)
    assert np.allclose(marginalize_zeta(E).data, W.data, rtol=1e-3, atol=1e-12)


def _slab(data_fn):
    grid = KGrid(m=5, k_max=1.5, x_extent=1.0, x_points=9)
    xs = grid.x_axis[:, None, None, None]
    k1 = grid.k_axis[None, :, None, None]
    return grid, KineticState("W", np.broadcast_to(data_fn(xs, k1), (9, 5, 5, 5)).copy(), grid)


def test_transport_leaves_zero_velocity_column():
    grid, st_ = _slab(lambda x, k: np.exp(-x * x) * (1 + k * k))
    out = transport_shift(st_, 0.3)
    mid = grid.m // 2
    assert np.allclose(out.data[:, mid], st_.data[:, mid])


def test_transport_leaves_constants():
    _, st_ = _slab(lambda x, k: 2.0 + 0 * x * k)
    assert np.allclose(transport_shift(st_, 0.7).data, 2.0)


def test_transport_exact_on_affine_data():
    dt = 0.2
    _, st_ = _slab(lambda x, k: 1.0 + 0.5 * x + 0.1 * k)
    grid = st_.grid
    xs = grid.x_axis[:, None, None, None]
    k1 = grid.k_axis[None, :, None, None]
    expected = np.broadcast_to(1.0 + 0.5 * (xs - dt * k1) + 0.1 * k1, st_.data.shape)
    assert np.allclose(transport_shift(st_, dt).data, expected, atol=1e-13)


def test_transport_time_reversal_on_affine_data():
    _, st_ = _slab(lambda x, k: 3.0 - x + 0.2 * k)
    back = transport_shift(transport_shift(st_, 0.4), -0.4)
    assert np.allclose(back.data, st_.data, atol=1e-13)


def test_transport_needs_x_grid():
    with pytest.raises(ValidationError):
        transport_shift(initial_W(PROFILE, KGrid(m=5)), 0.1)


def test_rk4_and_picard_agree():
    grid = KGrid(m=9, k_max=1.5)
    W0 = initial_W(PROFILE, grid)
    a = solve(W0, 0.125, 0.0625, "RK4", quadrature=COARSE).final.data
    b = solve(W0, 0.125, 0.0625, "Picard", quadrature=COARSE).final.data
    assert np.max(np.abs(a - b)) <= 1e-6 * np.max(np.abs(a))


def test_picard_coefficients_start_with_initial_data():
    grid = KGrid(m=5)
    W0 = initial_W(PROFILE, grid)
    A = picard_coefficients(W0, 1, COARSE)
    assert np.allclose(A[0][..., 0], W0.data)
    assert np.allclose(A[1][..., 0], collision_WK(W0, COARSE))


def test_trajectory_records_every_step():
    grid = KGrid(m=5)
    traj = solve(initial_W(PROFILE, grid), 0.25, 0.125, quadrature=COARSE)
    assert traj.times == [0.0, 0.125, 0.25]
    assert traj.meta["scheme"] == "RK4"


def test_semi_homogeneous_columns_evolve_independently():
    grid = KGrid(m=5, k_max=1.5, x_extent=0.5, x_points=3)
    W0 = initial_W(PROFILE, grid)
    out = solve(W0, 0.125, 0.125, "RK4", "semi-homogeneous", COARSE).final.data
    hom = KGrid(m=5, k_max=1.5)
    for i in range(3):
        ref = solve(KineticState("W", W0.data[i], hom), 0.125, 0.125, quadrature=COARSE).final.data
        assert np.allclose(out[i], ref, rtol=1e-12)


def test_total_mass_of_initial_data():
    grid = KGrid(m=17, k_max=1.5)
    mass = total_mass(initial_W(PROFILE, grid))
    exact = PROFILE.amplitude**2 * (np.pi / 4.0) ** 1.5  # int exp(-4 |k|^2) dk
    assert float(mass) == pytest.approx(exact, rel=1e-3)


def test_solver_rejects_long_horizons():
    with pytest.raises(ValidationError):
        solve(initial_W(PROFILE, KGrid(m=5)), 5.0, 0.1)


def test_blow_up_guard():
    big = InitialProfile(amplitude=200.0, k_decay=2.0)
    with pytest.raises(InstabilityError):
        solve(initial_W(big, KGrid(m=5)), 0.5, 0.25, quadrature=COARSE, growth_guard=10.0)


def test_picard_rejects_transport():
    grid = KGrid(m=5, k_max=1.5, x_extent=0.5, x_points=3)
    with pytest.raises(UnsupportedError):
        solve(initial_W(PROFILE, grid), 0.125, 0.125, "Picard", "inhomogeneous", COARSE)


def test_grid_requires_resolved_profile():
    with pytest.raises(ValidationError):
        initial_W(InitialProfile(k_decay=0.1), KGrid(m=5, k_max=1.0))


def test_gaussian_source_matches_initial_grid():
    grid = KGrid(m=5)
    src = GaussianSource.initial(PROFILE, grid)
    k = grid.k_points
    vals = src.amp[0] * np.exp(-src.beta * np.sum(k * k, axis=1))
    assert np.allclose(vals.reshape(5, 5, 5), initial_W(PROFILE, grid).data)
