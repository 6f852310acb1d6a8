from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import order_one_amplitude, wick_power
from wicknls.combinatorics import enumerate_trees, polarity
from wicknls.decorations import LatticeSpec
from wicknls.errors import BudgetError, UnsupportedError, ValidationError
from wicknls.montecarlo import (
    WickReport,
    diagrammatic_target,
    dyson_amplitude,
    sample_field,
    sample_moment,
    tree_table,
    wick_crosscheck,
    wick_monomial,
)
from wicknls.spectra import InitialProfile, scaling_lambda

PROFILE = InitialProfile(k_decay=2.0)
SPEC = LatticeSpec(2, 3, 1.0)


def test_sampler_moments():
    f = sample_field(LatticeSpec(2, 3, 2.0), seed=5, nsamples=4000)
    g = f.samples
    assert abs(np.mean(np.abs(g) ** 2) - 1) < 0.01
    assert abs(np.mean(g * g)) < 0.01
    assert abs(np.mean(g)) < 0.01


def test_sampler_is_deterministic_per_seed():
    a = sample_field(SPEC, seed=7, nsamples=3).samples
    b = sample_field(SPEC, seed=7, nsamples=3).samples
    c = sample_field(SPEC, seed=8, nsamples=3).samples
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)


def test_samples_independent_of_batch_size():
    a = sample_field(SPEC, seed=2, nsamples=5).samples
    b = sample_field(SPEC, seed=2, nsamples=2).samples
    assert np.array_equal(a[:2], b)


def test_field_mode_lookup():
    f = sample_field(SPEC, seed=0)
    i = f.index_of([0.5, 0.0, 0.0])
    assert np.allclose(f.modes[i], [0.5, 0.0, 0.0])
    with pytest.raises(ValidationError):
        f.index_of([3.0, 0.0, 0.0])


@pytest.mark.parametrize("p,q", [(0, 0), (1, 0), (2, 1), (3, 2), (2, 2)])
def test_wick_monomial_matches_reference(p, q):
    g = 0.4 - 1.1j
    assert wick_monomial(g, p, q) == pytest.approx(wick_power(g, p, q))


@pytest.mark.parametrize("p,q", [(1, 1), (2, 1), (2, 2)])
def test_wick_monomials_are_centered(p, q):
    g = sample_field(LatticeSpec(1, 1, 20.0), seed=1, nsamples=20_000).samples.reshape(-1)
    vals = wick_monomial(g, p, q)
    assert abs(vals.mean()) < 5 * vals.std() / np.sqrt(len(vals))


def test_order_zero_amplitude_is_weighted_gaussian():
    f = sample_field(SPEC, seed=3, nsamples=10)
    k = np.array([0.5, 0.0, 0.0])
    a = dyson_amplitude(0, 1.0, k, f, 2, 1.0, PROFILE)
    assert np.allclose(a, PROFILE.psi(k) * f.samples[:, f.index_of(k)])


def test_order_one_amplitude_vanishes_at_time_zero():
    f = sample_field(SPEC, seed=3, nsamples=4)
    assert np.allclose(dyson_amplitude(1, 0.0, np.zeros(3), f, 2, 1.0, PROFILE), 0)


@pytest.mark.parametrize("k", [(0, 0, 0), (1, 0, 0)])
def test_order_one_amplitude_matches_explicit_duhamel_sum(k):
    L, t, alpha = 2, 1.3, 1.0
    f = sample_field(SPEC, seed=11, nsamples=2)
    amp = dyson_amplitude(1, t, np.array(k) / L, f, L, alpha, PROFILE)
    pol = polarity(enumerate_trees(1)[0])
    modes = np.rint(f.modes * L).astype(int)
    for s in range(2):
        ref = order_one_amplitude(f.samples[s], modes, k, L, t, scaling_lambda(L, alpha), PROFILE.psi, pol)
        assert amp[s] == pytest.approx(ref, rel=1e-6)


def test_amplitude_order_limit():
    f = sample_field(SPEC, seed=0)
    with pytest.raises(UnsupportedError):
        dyson_amplitude(3, 1.0, np.zeros(3), f, 2, 1.0, PROFILE)


def test_amplitude_lattice_mismatch():
    f = sample_field(SPEC, seed=0)
    with pytest.raises(ValidationError):
        dyson_amplitude(1, 1.0, np.zeros(3), f, 4, 1.0, PROFILE)


def test_tree_table_budget():
    f = sample_field(LatticeSpec(4, 3, 1.0), seed=0)
    with pytest.raises(BudgetError):
        tree_table(enumerate_trees(2)[0], 1.0, np.zeros(3), f, 1.0, PROFILE, max_decorations=1e3)


def test_sample_moment_standard_error():
    x = np.array([1.0, -1.0, 1.0, -1.0])
    mean, se = sample_moment(x, np.ones(4))
    assert mean == 0 and se == pytest.approx(0.5)


def test_order_zero_target_is_initial_spectrum():
    k = np.array([0.5, 0.0, 0.0])
    assert diagrammatic_target(0, 1.0, k, 2, 1.0, PROFILE, 1.0) == pytest.approx(PROFILE.psi_sq(k))


def test_crosscheck_report_serializes():
    rep = wick_crosscheck(0, 0, 1.0, np.zeros(3), np.zeros(3), 2, 1.0, PROFILE, nsamples=200, seed=0, radius=1.0)
    assert isinstance(rep, WickReport)
    d = rep.to_dict()
    assert set(d["mc_estimate"]) == {"re", "im"}
    assert rep.z_score < 4


@pytest.mark.slow
def test_order_one_second_moment_matches_diagrams():
    f = sample_field(LatticeSpec(2, 3, 1.0), seed=4, nsamples=3000)
    rep = wick_crosscheck(1, 1, 1.0, np.zeros(3), np.zeros(3), 2, 1.0, PROFILE, radius=1.0, field=f)
    assert rep.z_score < 3.5


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000))
def test_distinct_orders_are_uncorrelated_in_expectation(seed):
    f = sample_field(LatticeSpec(2, 3, 1.0), seed=seed, nsamples=500)
    rep = wick_crosscheck(0, 1, 1.0, np.zeros(3), np.zeros(3), 2, 1.0, PROFILE, radius=1.0, field=f)
    assert rep.diagrammatic == 0
    assert rep.z_score < 5


@pytest.mark.slow
def test_phase_randomization_sweep():
    spec = LatticeSpec(2, 3, 1.0)
    f = sample_field(spec, seed=21, nsamples=2000)
    rng = np.random.default_rng(0)
    modes = f.modes
    cache = {}

    def amp(n, i):
        if (n, i) not in cache:
            cache[n, i] = dyson_amplitude(n, 1.0, modes[i], f, 2, 1.0, PROFILE)
        return cache[n, i]

    worst = 0.0
    for _ in range(50):
        i, j = rng.choice(len(modes), 2, replace=False)
        n, m = rng.integers(0, 2, 2)
        a, b = amp(int(n), int(i)), amp(int(m), int(j))
        mean, se = sample_moment(a, b)
        worst = max(worst, abs(mean) / se)
    assert worst <= 4.0


def test_standard_error_scaling_exponent():
    f = sample_field(LatticeSpec(2, 3, 1.0), seed=9, nsamples=4000)
    a = dyson_amplitude(1, 1.0, np.zeros(3), f, 2, 1.0, PROFILE)
    sizes = np.array([500, 1000, 2000, 4000])
    ses = [sample_moment(a[:s], a[:s])[1] for s in sizes]
    slope = np.polyfit(np.log(sizes), np.log(ses), 1)[0]
    assert -0.6 <= slope <= -0.4
