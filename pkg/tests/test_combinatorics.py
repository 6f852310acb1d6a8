from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import catalan3_direct
from wicknls.combinatorics import (
    Couple,
    SignedTernaryTree,
    catalan3,
    conjugate_classes,
    couple_count,
    couple_product,
    enumerate_couples,
    enumerate_regular_couples,
    enumerate_trees,
    irreducible_factorization,
    internal_classes,
    is_regular,
    is_regular_recursive,
    polarity,
    regular_couple_count,
    regular_index,
)
from wicknls.decorations import nonregular_order2_couple
from wicknls.errors import CapacityError, SignError, ValidationError


@pytest.mark.parametrize("n", range(7))
def test_ternary_catalan_matches_recursion(n):
    assert catalan3(n) == catalan3_direct(n)


@pytest.mark.parametrize("n", range(5))
def test_tree_enumeration_count(n):
    trees = enumerate_trees(n)
    assert len(trees) == catalan3(n)
    assert len({t.encode() for t in trees}) == len(trees)
    assert all(t.order == n for t in trees)


@pytest.mark.parametrize("n", range(4))
def test_couple_count_formula(n):
    assert len(enumerate_couples(n)) == couple_count(n)
    assert couple_count(n) == catalan3(n) ** 2 * math.factorial(n + 1) * math.factorial(n)


def test_order_two_couple_count():
    assert couple_count(2) == 108


@pytest.mark.parametrize("n", range(5))
def test_regular_couple_count(n):
    assert len(enumerate_regular_couples(n)) == regular_couple_count(n) == 2**n * catalan3(n)


def test_order_three_regular_count():
    assert len(enumerate_regular_couples(3)) == 96


def test_regular_enumeration_agrees_with_filter():
    direct = sorted(c.encode() for c in enumerate_couples(2) if is_regular(c))
    assert direct == sorted(c.encode() for c in enumerate_regular_couples(2))


def test_tree_sign_rule_enforced():
    tree = enumerate_trees(1)[0]
    assert tree.signs[0] == 1
    assert sorted(tree.signs[1:]) == [-1, 1, 1]
    with pytest.raises(SignError):
        enumerate_trees(1, sign=0)


def test_tree_encoding_round_trip():
    for t in enumerate_trees(3):
        assert SignedTernaryTree.decode(t.encode()) == t


def test_couple_encoding_round_trip():
    for c in enumerate_couples(2):
        assert Couple.decode(c.encode()) == c


def test_enumeration_limit_raises():
    with pytest.raises(CapacityError):
        enumerate_couples(3, limit=10)


def test_polarity_is_unit():
    for c in enumerate_couples(2):
        assert abs(abs(polarity(c)) - 1) < 1e-15


def test_trivial_couple_is_regular():
    (c,) = enumerate_couples(0)
    assert regular_index(c) == 0 and is_regular(c)


def test_nonregular_example():
    q = nonregular_order2_couple()
    assert q.order == 2
    assert not is_regular(q)
    assert regular_index(q) >= 1


def test_decode_rejects_garbage():
    with pytest.raises(ValidationError):
        Couple.decode("not a couple")


COUPLES = {n: enumerate_couples(n) for n in range(4)}
couples_up_to_3 = st.integers(0, 3).flatmap(lambda n: st.sampled_from(COUPLES[n]))


@settings(max_examples=150, deadline=None)
@given(couples_up_to_3)
def test_conjugate_classes_have_at_most_two_nodes(c):
    for cl in conjugate_classes(c).classes:
        assert len(cl) <= 2


@settings(max_examples=150, deadline=None)
@given(couples_up_to_3)
def test_doubletons_cross_trees_with_opposite_signs(c):
    for a, b in conjugate_classes(c).doubletons:
        assert c.signs[a] == -c.signs[b]
        assert (a < c.offset) != (b < c.offset)


@settings(max_examples=150, deadline=None)
@given(couples_up_to_3)
def test_factorization_independent_of_split_order(c):
    picks = len(internal_classes(c)) + 1
    assert len({irreducible_factorization(c, pick=p).multiset() for p in range(picks)}) == 1


@settings(max_examples=150, deadline=None)
@given(couples_up_to_3)
def test_factorization_preserves_order(c):
    assert irreducible_factorization(c).order == c.order


@settings(max_examples=150, deadline=None)
@given(couples_up_to_3)
def test_regularity_tests_agree(c):
    assert is_regular(c) == is_regular_recursive(c)


@settings(max_examples=100, deadline=None)
@given(
    st.integers(1, 2).flatmap(
        lambda nb: st.tuples(
            st.sampled_from(COUPLES[nb]),
            st.sampled_from(COUPLES[1] + (COUPLES[2] if nb == 1 else [])),
            st.integers(0, 10),
        )
    )
)
def test_regular_index_additive_under_products(args):
    base, att, which = args
    pair = base.pairs[which % len(base.pairs)]
    prod = couple_product(base, pair, att)
    assert prod.order == base.order + att.order
    assert regular_index(prod) == regular_index(base) + regular_index(att)


def test_product_rejects_unknown_pair():
    base = enumerate_couples(1)[0]
    with pytest.raises(ValidationError):
        couple_product(base, (0, 0), base)
