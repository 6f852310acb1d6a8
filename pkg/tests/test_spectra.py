from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import order_one_at_zero
from wicknls.combinatorics import enumerate_couples, enumerate_regular_couples, trivial_couple
from wicknls.decorations import nonregular_order2_couple
from wicknls.errors import BudgetError, NonRegularError, ValidationError
from wicknls.spectra import (
    InitialProfile,
    ResonantQuadrature,
    finite_L_spectrum,
    finite_L_spectrum_direct,
    kinetic_limit_spectrum,
    marginal_inhom,
    order_one_kinetic,
    resonant_integral,
    resonant_integral_mc,
    scaling_lambda,
)

PROFILE = InitialProfile(k_decay=2.0)
FINE = ResonantQuadrature(24, 12, 16, 24, 16, rcut=3.0)
ORDER1 = enumerate_regular_couples(1)


def test_order_one_kinetic_matches_closed_form():
    assert order_one_kinetic(1.0, np.zeros(3), PROFILE, FINE) == pytest.approx(order_one_at_zero(2.0), rel=1e-10)


@pytest.mark.parametrize("k_decay", [1.0, 3.0])
def test_order_one_closed_form_other_widths(k_decay):
    p = InitialProfile(k_decay=k_decay)
    q = ResonantQuadrature(24, 12, 16, 24, 16, rcut=6.0 / np.sqrt(k_decay))
    assert order_one_kinetic(1.0, np.zeros(3), p, q) == pytest.approx(order_one_at_zero(k_decay), rel=1e-8)


def test_product_rule_agrees_with_monte_carlo():
    F = lambda k1, k2, k3: PROFILE.psi_sq(k1) * PROFILE.psi_sq(k2) * PROFILE.psi_sq(k3)  # noqa: E731
    k = np.array([0.3, -0.2, 0.1])
    exact = resonant_integral(F, k, FINE)
    est, se = resonant_integral_mc(F, k, 200_000, seed=1, scale=0.5)
    assert abs(est - exact) <= 3 * se


def test_kinetic_spectrum_linear_in_time_at_order_one():
    k = np.array([0.5, 0.0, 0.0])
    a = kinetic_limit_spectrum(ORDER1[0], 1.0, k, PROFILE)
    b = kinetic_limit_spectrum(ORDER1[0], 2.5, k, PROFILE)
    assert b == pytest.approx(2.5 * a, rel=1e-13)


def test_kinetic_spectrum_scales_as_time_power_at_order_two():
    q = ResonantQuadrature(6, 4, 6, 6, 6)
    c = enumerate_regular_couples(2)[0]
    k = np.zeros(3)
    assert kinetic_limit_spectrum(c, 0.5, k, PROFILE, q) == pytest.approx(
        0.25 * kinetic_limit_spectrum(c, 1.0, k, PROFILE, q), rel=1e-12)


def test_closed_and_recursive_time_factors_agree():
    q = ResonantQuadrature(6, 4, 6, 6, 6)
    for c in enumerate_regular_couples(2)[:4]:
        a = kinetic_limit_spectrum(c, 1.0, np.zeros(3), PROFILE, q)
        b = kinetic_limit_spectrum(c, 1.0, np.zeros(3), PROFILE, q, method="recursive")
        assert a == pytest.approx(b, rel=1e-12)


def test_kinetic_spectrum_rejects_nonregular():
    with pytest.raises(NonRegularError):
        kinetic_limit_spectrum(nonregular_order2_couple(), 1.0, np.zeros(3), PROFILE)


def test_trivial_couple_gives_initial_spectrum():
    k = np.array([0.5, 0.0, 0.0])
    assert finite_L_spectrum(trivial_couple(), 1.0, k, 2, 1.0, PROFILE) == pytest.approx(PROFILE.psi_sq(k))
    assert kinetic_limit_spectrum(trivial_couple(), 1.0, k, PROFILE) == pytest.approx(PROFILE.psi_sq(k))


@pytest.mark.parametrize("c", enumerate_couples(1))
@pytest.mark.parametrize("k", [(0.0, 0.0, 0.0), (0.5, 0.0, 0.0)])
def test_grouped_and_direct_finite_sums_agree(c, k):
    k = np.array(k)
    a = finite_L_spectrum(c, 1.0, k, 2, 1.0, PROFILE, radius=1.0)
    b = finite_L_spectrum_direct(c, 1.0, k, 2, 1.0, PROFILE, radius=1.0)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-15)


def test_finite_spectrum_at_zero_time_vanishes():
    assert abs(finite_L_spectrum(ORDER1[0], 0.0, np.zeros(3), 2, 1.0, PROFILE, radius=1.0)) < 1e-15


def test_finite_spectrum_budget():
    with pytest.raises(BudgetError):
        finite_L_spectrum(enumerate_couples(2)[0], 1.0, np.zeros(3), 8, 1.0, PROFILE, radius=2.0, max_decorations=1e3)


def test_semi_homogeneous_marginal_at_origin_matches_homogeneous():
    val = marginal_inhom(ORDER1[0], 1.0, np.zeros(3), np.zeros(3), PROFILE, quadrature=FINE)
    assert val == pytest.approx(order_one_at_zero(2.0), rel=1e-8)


def test_marginal_order_zero_is_initial_density():
    x, k = np.array([0.3, 0.0, 0.0]), np.array([0.2, 0.1, 0.0])
    assert marginal_inhom(trivial_couple(), 1.0, k, x, PROFILE) == pytest.approx(abs(PROFILE.phi(x, k)) ** 2)


def test_scaling_lambda():
    assert scaling_lambda(4.0, 1.0) == pytest.approx(0.5)


def test_profile_validation():
    with pytest.raises(ValidationError):
        InitialProfile(k_decay=-1.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 0.8), st.floats(0.0, np.pi), st.floats(0.0, 2 * np.pi))
def test_order_one_kinetic_positive_and_isotropic(r, polar, azimuth):
    k = r * np.array([np.sin(polar) * np.cos(azimuth), np.sin(polar) * np.sin(azimuth), np.cos(polar)])
    q = ResonantQuadrature(rcut=4.0)
    val = order_one_kinetic(1.0, k, PROFILE, q)
    rot = order_one_kinetic(1.0, np.array([np.linalg.norm(k), 0.0, 0.0]), PROFILE, q)
    assert val > 0
    assert val == pytest.approx(rot, rel=1e-2)
