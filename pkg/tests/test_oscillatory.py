from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wicknls.errors import ValidationError
from wicknls.oscillatory import (
    INFINITY,
    SeparableTestFunction,
    SpatialBlock,
    TemporalProfile,
    continuum_reference,
    convergence_sweep,
    gauss_moment_ratios,
    gauss_sum,
    gauss_sum_moment,
    osc_functional,
    scale_theta,
)


def test_gauss_sum_at_zero_counts_terms():
    assert gauss_sum(0.0, 0.0, 0, 10) == pytest.approx(11)


@pytest.mark.parametrize("q", [3, 5, 7, 11, 13])
def test_classical_quadratic_gauss_sum_modulus(q):
    # s = 2/q gives sum_n exp(2 pi i n^2 / q); its modulus is sqrt(q) for odd prime q
    assert abs(gauss_sum(2.0 / q, 0.0, 0, q - 1)) == pytest.approx(np.sqrt(q), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 2), st.floats(-1, 1), st.integers(-5, 5), st.integers(0, 20))
def test_gauss_sum_bounded_by_length(s, r, h, N):
    assert abs(gauss_sum(s, r, h, N)) <= N + 1 + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 2), st.floats(-1, 1), st.integers(0, 20))
def test_gauss_sum_shift_invariance_in_modulus(s, r, N):
    # shifting the summation start by one multiplies by a phase and changes r by 2 s
    a = abs(gauss_sum(s, r, 1, N))
    b = abs(gauss_sum(s, r + 2 * s, 0, N))
    assert a == pytest.approx(b, abs=1e-9)


def test_fourth_moment_exact_by_trapezoid():
    N = 6
    coarse = gauss_sum_moment(4, N)
    fine = gauss_sum_moment(4, N, s_grid=4 * (4 * N * N + 1))
    assert coarse == pytest.approx(fine, rel=1e-12)


def test_fourth_moment_counts_solutions():
    # at r = 0 the period average of |G|^4 counts (a,b,c,d) in [0,N]^4 with a^2+b^2 = c^2+d^2
    N = 5
    rng = range(N + 1)
    sols = sum(1 for a in rng for b in rng for c in rng for d in rng if a * a + b * b == c * c + d * d)
    assert gauss_sum_moment(4, N) == pytest.approx(sols, rel=1e-10)


def test_moment_ratio_rows():
    rows = gauss_moment_ratios((8, 16))
    assert [r["N"] for r in rows] == [8, 16]
    assert all(r["r4"] < 2.0 and r["r6"] < 2.0 for r in rows)


def test_moment_order_validated():
    with pytest.raises(ValidationError):
        gauss_sum_moment(5, 4)


def test_continuum_reference_value():
    assert continuum_reference(3) == pytest.approx(2.0, abs=1e-10)
    assert continuum_reference(2) == pytest.approx(np.pi, abs=1e-8)


def test_continuum_functional_of_unit_gaussian():
    phi = SeparableTestFunction.gaussian(1, 3)
    assert osc_functional(scale_theta(phi, INFINITY, 1.0), INFINITY) == pytest.approx(2.0, abs=1e-9)


@pytest.mark.parametrize("L", [2, 4, 8])
def test_factorized_and_direct_lattice_sums_agree(L):
    phi = SeparableTestFunction((TemporalProfile(),), (SpatialBlock(width=0.5),), 1)
    scaled = scale_theta(phi, L, 1.0)
    assert osc_functional(scaled, L) == pytest.approx(osc_functional(scaled, L, method="direct"), rel=1e-10)


def test_factorized_and_direct_agree_in_two_dimensions():
    phi = SeparableTestFunction((TemporalProfile(),), (SpatialBlock(width=0.4),), 2)
    scaled = scale_theta(phi, 2, 0.5)
    assert osc_functional(scaled, 2) == pytest.approx(osc_functional(scaled, 2, method="direct"), rel=1e-10)


def test_multi_slot_functional_factorizes():
    one = SeparableTestFunction.gaussian(1, 3)
    two = SeparableTestFunction.gaussian(2, 3)
    a = osc_functional(scale_theta(one, 4, 0.5), 4)
    b = osc_functional(scale_theta(two, 4, 0.5), 4)
    assert b == pytest.approx(a * a, rel=1e-12)


def test_scale_theta_validates_alpha():
    with pytest.raises(ValidationError):
        scale_theta(SeparableTestFunction.gaussian(), 4, 2.5)


def test_lattice_functional_needs_decay():
    phi = SeparableTestFunction((TemporalProfile("constant"),), (SpatialBlock(),), 3)
    with pytest.raises(ValidationError):
        osc_functional(phi, 4)


def test_sweep_error_decreases():
    rows = convergence_sweep((4, 8, 16), (0.5,))
    err = np.array([r["abs_error"] for r in rows])
    assert np.all(np.diff(err) < 0)


def _per_coordinate_gaussian(s: float) -> float:
    from scipy import integrate

    # int int exp(2 pi i s x y - pi x^2 - pi y^2) dx dy, real part (the imaginary part vanishes by symmetry)
    val, _ = integrate.dblquad(lambda y, x: np.cos(2 * np.pi * s * x * y) * np.exp(-np.pi * (x * x + y * y)),
                               -6, 6, -6, 6, epsabs=1e-11)
    return val


@pytest.mark.parametrize("s", [0.0, 0.7, 2.0])
def test_per_coordinate_reduction_exponent(s):
    assert _per_coordinate_gaussian(s) == pytest.approx((1 + s * s) ** -0.5, rel=1e-8)


def test_continuum_functional_of_space_time_gaussian():
    from scipy import integrate

    ref, _ = integrate.quad(lambda s: np.exp(-np.pi * s * s) * (1 + s * s) ** -1.5, -np.inf, np.inf, epsabs=1e-13)
    phi = SeparableTestFunction.gaussian(1, 3)
    assert osc_functional(phi, INFINITY) == pytest.approx(ref, rel=1e-9)
