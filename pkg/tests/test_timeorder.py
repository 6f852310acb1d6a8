from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import simplex_chain_theta
from wicknls.combinatorics import enumerate_trees
from wicknls.errors import ValidationError
from wicknls.timeorder import (
    ExpPoly,
    OrderedForest,
    decay_bound,
    linear_extension_count,
    simplex_volume,
    theta,
    theta_quadrature,
    theta_value,
)


@st.composite
def forests(draw, max_size=6):
    n = draw(st.integers(1, max_size))
    parents = [None]
    for i in range(1, n):
        j = draw(st.integers(-1, i - 1))
        parents.append(None if j < 0 else j)
    perm = draw(st.permutations(range(n)))
    inv = [perm.index(i) for i in range(n)]
    return OrderedForest(tuple(None if parents[inv[i]] is None else perm[parents[inv[i]]] for i in range(n)))


def test_chain_and_antichain_extension_counts():
    assert linear_extension_count(OrderedForest.chain(5)) == 1
    assert linear_extension_count(OrderedForest.antichain(5)) == math.factorial(5)


def test_cycle_rejected():
    with pytest.raises(ValidationError):
        OrderedForest((1, 0))


@settings(max_examples=200, deadline=None)
@given(forests())
def test_theta_at_zero_frequency_is_simplex_volume(G):
    assert abs(theta_value(G, np.zeros(G.size), 1.0) - simplex_volume(G, 1.0)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(forests(max_size=3), st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.floats(0.1, 3))
def test_closed_form_matches_quadrature(G, w, t):
    omega = np.array(w[: G.size])
    assert abs(theta_value(G, omega, t) - theta_quadrature(G, omega, t, nodes=16)) < 1e-9


@pytest.mark.parametrize("omegas", [[0.7], [1.0, -2.0], [0.5, 0.5, -1.0], [1e-9, 2.0, 0.0]])
def test_chain_matches_independent_simplex_rule(omegas):
    G = OrderedForest.chain(len(omegas))
    assert abs(theta_value(G, np.array(omegas), 1.5) - simplex_chain_theta(omegas, 1.5, nodes=30)) < 1e-10


def test_antichain_factorizes():
    w = np.array([0.3, -1.2, 2.0])
    expected = np.prod([(np.exp(2j * np.pi * x * 2.0) - 1) / (2j * np.pi * x) for x in w])
    assert abs(theta_value(OrderedForest.antichain(3), w, 2.0) - expected) < 1e-12


@settings(max_examples=150, deadline=None)
@given(forests(max_size=4), st.integers(0, 2**31 - 1), st.floats(0.5, 8))
def test_decay_bound_holds(G, seed, t):
    w = np.random.default_rng(seed).uniform(-4, 4, G.size)
    assert abs(theta_value(G, w, t)) <= 4.0 * decay_bound(G, w, t)


@pytest.mark.parametrize("w", [[1e-11, -1e-11], [1e-9, 0.0], [3e-3, 1e-3], [5.0, -5.0 + 1e-7]])
@pytest.mark.parametrize("t", [1.0, 50.0])
def test_near_resonant_frequencies_are_stable(w, t):
    G = OrderedForest.chain(2)
    a = theta_value(G, np.array(w), t)
    b = simplex_chain_theta(w, t, nodes=30) if t == 1.0 else theta_quadrature(G, np.array(w), t, nodes=24)
    assert abs(a - b) <= 1e-9 * max(1.0, abs(b))


def test_exppoly_primitive_differentiates_back():
    p = ExpPoly.exp(1.3) * 2.0 + ExpPoly.constant(0.5)
    P = p.primitive()
    h = 1e-6
    for s in (0.2, 1.0):
        assert abs((P(s + h) - P(s - h)) / (2 * h) - p(s)) < 1e-6
    assert abs(P(0.0)) < 1e-14


def test_forest_from_tree_counts_branching_nodes():
    for tree in enumerate_trees(3):
        assert OrderedForest.from_tree(tree).size == 3


def test_decay_bound_needs_positive_time():
    with pytest.raises(ValidationError):
        decay_bound(OrderedForest.chain(1), [0.0], 0.0)


def test_theta_returns_callable_in_time():
    f = theta(OrderedForest.chain(1), [0.0])
    assert f(2.0) == pytest.approx(2.0)
