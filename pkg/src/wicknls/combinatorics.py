"""Signed ternary trees, couples, conjugate classes and irreducible factorization.

Trees are encoded by their pre-order shape string over the alphabet ``B``
(branching node) and ``L`` (leaf) together with the root sign.  Node ids are
pre-order positions, so the subtree of node ``m`` is the contiguous id range
``[m, subtree_end[m])`` and ancestry is an interval test.

A couple stores a positive tree, a negative tree and a pairing; inside a
couple, nodes carry *global* ids: the positive tree occupies
``0 .. S-1`` and the negative tree ``S .. 2S-1`` where ``S = 3n + 1``.

Text format (round-trip exact)::

    tree   := <shape> <signs>              e.g. "BLLL ++-+"
    couple := <tree> | <tree> | <pairing>  e.g. "BLLL ++-+ | BLLL --+- | 0 1 2"

``pairing[i]`` is the pre-order index, among the leaves of the negative tree,
of the partner of the ``i``-th leaf of the positive tree.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from math import comb, factorial
from typing import Iterator, Sequence

from .errors import CapacityError, InvalidPairError, NotALeafError, SignError, ValidationError

DEFAULT_ENUMERATION_LIMIT = 10**7

CHILD_SIGN = (1, -1, 1)


def catalan3(n: int) -> int:
    """Number of ternary trees with ``n`` branching nodes, C(3n, n) / (2n + 1)."""
    if n < 0:
        raise ValidationError("order must be non-negative")
    return comb(3 * n, n) // (2 * n + 1)


def couple_count(n: int) -> int:
    """Cardinality of the set of order-``n`` couples."""
    return catalan3(n) ** 2 * factorial(n + 1) * factorial(n)


def regular_couple_count(n: int) -> int:
    return 2**n * catalan3(n)


def _check_limit(count: int, limit: int | None, what: str) -> None:
    cap = DEFAULT_ENUMERATION_LIMIT if limit is None else limit
    if count > cap:
        raise CapacityError(f"{what}: {count} diagrams exceed the enumeration limit {cap}")


# ---------------------------------------------------------------------------
# trees
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _parse_shape(shape: str) -> tuple[tuple, tuple, tuple]:
    """Return (children, parent, subtree_end) for a pre-order shape string."""
    size = len(shape)
    children: list[tuple[int, int, int] | None] = [None] * size
    parent: list[int | None] = [None] * size
    end = [0] * size

    def walk(pos: int) -> int:
        if pos >= size:
            raise ValidationError(f"truncated shape string {shape!r}")
        ch = shape[pos]
        if ch == "L":
            end[pos] = pos + 1
            return pos + 1
        if ch != "B":
            raise ValidationError(f"invalid shape symbol {ch!r}")
        kids = []
        nxt = pos + 1
        for _ in range(3):
            kids.append(nxt)
            parent[nxt] = pos
            nxt = walk(nxt)
        children[pos] = (kids[0], kids[1], kids[2])
        end[pos] = nxt
        return nxt

    if walk(0) != size:
        raise ValidationError(f"trailing symbols in shape string {shape!r}")
    return tuple(children), tuple(parent), tuple(end)


@dataclass(frozen=True, order=True)
class SignedTernaryTree:
    """Rooted ternary tree with the alternating sign rule.

    Parameters
    ----------
    shape : str
        Pre-order string over ``{"B", "L"}``.
    sign : int
        Sign of the root, ``+1`` or ``-1``.  Child ``j`` of a node of sign
        ``s`` has sign ``s * (+1, -1, +1)[j]``.
    """

    shape: str
    sign: int

    def __post_init__(self) -> None:
        if self.sign not in (1, -1):
            raise SignError("root sign must be +1 or -1")
        _parse_shape(self.shape)

    # arena ----------------------------------------------------------------
    @property
    def size(self) -> int:
        return len(self.shape)

    @property
    def root(self) -> int:
        return 0

    @cached_property
    def children(self) -> tuple:
        return _parse_shape(self.shape)[0]

    @cached_property
    def parent(self) -> tuple:
        return _parse_shape(self.shape)[1]

    @cached_property
    def subtree_end(self) -> tuple:
        return _parse_shape(self.shape)[2]

    @cached_property
    def signs(self) -> tuple[int, ...]:
        out = [0] * self.size
        out[0] = self.sign
        for b, kids in enumerate(self.children):
            if kids is not None:
                for j, c in enumerate(kids):
                    out[c] = out[b] * CHILD_SIGN[j]
        return tuple(out)

    @cached_property
    def leaves(self) -> tuple[int, ...]:
        return tuple(i for i, ch in enumerate(self.shape) if ch == "L")

    @cached_property
    def branching(self) -> tuple[int, ...]:
        return tuple(i for i, ch in enumerate(self.shape) if ch == "B")

    @property
    def order(self) -> int:
        return len(self.branching)

    def is_leaf(self, node: int) -> bool:
        return self.shape[node] == "L"

    def descends(self, m: int, n: int) -> bool:
        """True when ``n`` lies in the subtree of ``m`` (``m`` is an ancestor of ``n`` or equal)."""
        return m <= n < self.subtree_end[m]

    # operations -------------------------------------------------------------
    def graft(self, leaf: int, sub: "SignedTernaryTree") -> "SignedTernaryTree":
        return graft(self, leaf, sub)

    def split(self, node: int) -> tuple["SignedTernaryTree", "SignedTernaryTree"]:
        """Return ``(hat, check)``: the tree with ``node``'s subtree collapsed to a leaf, and that subtree."""
        end = self.subtree_end[node]
        check = SignedTernaryTree(self.shape[node:end], self.signs[node])
        hat = SignedTernaryTree(self.shape[:node] + "L" + self.shape[end:], self.sign)
        return hat, check

    def subtree(self, node: int) -> "SignedTernaryTree":
        return self.split(node)[1]

    # text -------------------------------------------------------------------
    def encode(self) -> str:
        return f"{self.shape} " + "".join("+" if s > 0 else "-" for s in self.signs)

    @classmethod
    def decode(cls, text: str) -> "SignedTernaryTree":
        parts = text.split()
        if len(parts) != 2:
            raise ValidationError(f"tree text must be '<shape> <signs>', got {text!r}")
        shape, signs = parts
        if len(signs) != len(shape) or any(ch not in "+-" for ch in signs):
            raise ValidationError(f"bad sign string {signs!r}")
        tree = cls(shape, 1 if signs[0] == "+" else -1)
        if tree.encode() != f"{shape} {signs}":
            raise SignError(f"sign string {signs!r} violates the child sign rule")
        return tree

    def __str__(self) -> str:
        return self.encode()


def leaf_tree(sign: int) -> SignedTernaryTree:
    return SignedTernaryTree("L", sign)


def graft(base: SignedTernaryTree, leaf: int, sub: SignedTernaryTree) -> SignedTernaryTree:
    """Attach the root of ``sub`` to the leaf ``leaf`` of ``base``.

    Node ids of ``base`` below ``leaf`` are unchanged, the attached nodes take
    ids ``leaf .. leaf + sub.size - 1`` and later ids shift by ``sub.size - 1``.
    """
    if not 0 <= leaf < base.size:
        raise NotALeafError(f"node {leaf} out of range")
    if not base.is_leaf(leaf):
        raise NotALeafError(f"node {leaf} is a branching node")
    if base.signs[leaf] != sub.sign:
        raise SignError("leaf sign differs from the root sign of the grafted tree")
    return SignedTernaryTree(base.shape[:leaf] + sub.shape + base.shape[leaf + 1 :], base.sign)


def tree_product(t1: SignedTernaryTree, t2: SignedTernaryTree, t3: SignedTernaryTree) -> SignedTernaryTree:
    """Join three trees of signs ``(s, -s, s)`` under a new root of sign ``s``."""
    s = t1.sign
    if t2.sign != -s or t3.sign != s:
        raise SignError("tree product needs signs (s, -s, s)")
    return SignedTernaryTree("B" + t1.shape + t2.shape + t3.shape, s)


@lru_cache(maxsize=None)
def _shapes(n: int) -> tuple[str, ...]:
    if n == 0:
        return ("L",)
    out = []
    for n1 in range(n):
        for n2 in range(n - n1):
            n3 = n - 1 - n1 - n2
            for a in _shapes(n1):
                for b in _shapes(n2):
                    for c in _shapes(n3):
                        out.append("B" + a + b + c)
    return tuple(sorted(out))


def enumerate_trees(n: int, sign: int = 1, limit: int | None = None) -> list[SignedTernaryTree]:
    """All signed ternary trees of order ``n``, sorted by shape string."""
    if sign not in (1, -1):
        raise SignError("sign must be +1 or -1")
    _check_limit(catalan3(n), limit, f"trees of order {n}")
    return [SignedTernaryTree(s, sign) for s in _shapes(n)]


def _polarity_from_counts(plus_branch: int, minus_branch: int) -> complex:
    # product of i * sign over branching nodes: i^p * (-i)^q
    return (1, 1j, -1, -1j)[(plus_branch + 3 * minus_branch) % 4]


# ---------------------------------------------------------------------------
# couples
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConjugateClassPartition:
    """Partition of the global node ids of a couple into classes of size one or two."""

    classes: tuple[tuple[int, ...], ...]

    @property
    def doubletons(self) -> tuple[tuple[int, int], ...]:
        return tuple(c for c in self.classes if len(c) == 2)  # type: ignore[misc]

    @property
    def singletons(self) -> tuple[tuple[int], ...]:
        return tuple(c for c in self.classes if len(c) == 1)  # type: ignore[misc]

    def class_of(self, node: int) -> tuple[int, ...]:
        for c in self.classes:
            if node in c:
                return c
        raise KeyError(node)

    def partner(self, node: int) -> int | None:
        c = self.class_of(node)
        if len(c) == 1:
            return None
        return c[1] if c[0] == node else c[0]


@dataclass(frozen=True)
class Couple:
    """A positive tree, a negative tree of the same order, and a leaf pairing."""

    plus: SignedTernaryTree
    minus: SignedTernaryTree
    pairing: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.plus.sign != 1 or self.minus.sign != -1:
            raise SignError("a couple needs a positive and a negative tree")
        if self.plus.order != self.minus.order:
            raise ValidationError("trees of a couple must have equal order")
        nl = len(self.plus.leaves)
        if sorted(self.pairing) != list(range(nl)):
            raise ValidationError("pairing must be a permutation of the leaves")
        ps, ms = self.plus.signs, self.minus.signs
        for i, j in enumerate(self.pairing):
            if ps[self.plus.leaves[i]] == ms[self.minus.leaves[j]]:
                raise SignError("paired leaves must have opposite signs")

    # geometry -------------------------------------------------------------
    @property
    def order(self) -> int:
        return self.plus.order

    @property
    def offset(self) -> int:
        """Global id of the negative root."""
        return self.plus.size

    @property
    def size(self) -> int:
        return 2 * self.plus.size

    @property
    def roots(self) -> tuple[int, int]:
        return (0, self.offset)

    def tree_of(self, node: int) -> tuple[SignedTernaryTree, int]:
        """Return the tree containing global id ``node`` and the local id."""
        if node < self.offset:
            return self.plus, node
        return self.minus, node - self.offset

    @cached_property
    def signs(self) -> tuple[int, ...]:
        return self.plus.signs + self.minus.signs

    @cached_property
    def children(self) -> tuple:
        s = self.offset
        shifted = tuple(None if c is None else tuple(x + s for x in c) for c in self.minus.children)
        return self.plus.children + shifted

    @cached_property
    def parent(self) -> tuple:
        s = self.offset
        return self.plus.parent + tuple(None if p is None else p + s for p in self.minus.parent)

    @cached_property
    def subtree_end(self) -> tuple[int, ...]:
        s = self.offset
        return self.plus.subtree_end + tuple(e + s for e in self.minus.subtree_end)

    @cached_property
    def branching(self) -> tuple[int, ...]:
        s = self.offset
        return self.plus.branching + tuple(b + s for b in self.minus.branching)

    @cached_property
    def leaves(self) -> tuple[int, ...]:
        s = self.offset
        return self.plus.leaves + tuple(x + s for x in self.minus.leaves)

    def descends(self, m: int, n: int) -> bool:
        return m <= n < self.subtree_end[m]

    @cached_property
    def pairs(self) -> tuple[tuple[int, int], ...]:
        """Leaf pairs as ``(positive-tree leaf, negative-tree leaf)`` global ids."""
        s = self.offset
        ml = self.minus.leaves
        return tuple((a, ml[j] + s) for a, j in zip(self.plus.leaves, self.pairing))

    @cached_property
    def pair_of_leaf(self) -> dict[int, int]:
        out = {}
        for p, (a, b) in enumerate(self.pairs):
            out[a] = p
            out[b] = p
        return out

    def partner(self, leaf: int) -> int:
        a, b = self.pairs[self.pair_of_leaf[leaf]]
        return b if leaf == a else a

    @classmethod
    def from_pairs(
        cls, plus: SignedTernaryTree, minus: SignedTernaryTree, pairs: Sequence[tuple[int, int]]
    ) -> "Couple":
        """Build from global-id pairs, each pair given in any order."""
        s = plus.size
        mindex = {x + s: j for j, x in enumerate(minus.leaves)}
        pindex = {x: i for i, x in enumerate(plus.leaves)}
        pairing = [-1] * len(plus.leaves)
        for a, b in pairs:
            if a >= s:
                a, b = b, a
            if a not in pindex or b not in mindex:
                raise ValidationError("each pair must join a leaf of each tree")
            pairing[pindex[a]] = mindex[b]
        return cls(plus, minus, tuple(pairing))

    # derived structure -------------------------------------------------------
    @cached_property
    def ancestor_masks(self) -> tuple[int, ...]:
        """Bit ``p`` of entry ``m`` is set when node ``m`` lies in the ancestor set of pair ``p``."""
        masks = [0] * self.size
        for p, (a, b) in enumerate(self.pairs):
            bit = 1 << p
            for leaf in (a, b):
                node: int | None = leaf
                while node is not None:
                    masks[node] |= bit
                    node = self.parent[node]
        return tuple(masks)

    @cached_property
    def polarity(self) -> complex:
        return polarity(self)

    def encode(self) -> str:
        return f"{self.plus.encode()} | {self.minus.encode()} | " + " ".join(str(j) for j in self.pairing)

    @classmethod
    def decode(cls, text: str) -> "Couple":
        parts = [p.strip() for p in text.split("|")]
        if len(parts) != 3:
            raise ValidationError(f"couple text needs three '|'-separated fields, got {text!r}")
        plus = SignedTernaryTree.decode(parts[0])
        minus = SignedTernaryTree.decode(parts[1])
        try:
            pairing = tuple(int(x) for x in parts[2].split())
        except ValueError as exc:
            raise ValidationError(f"bad pairing field {parts[2]!r}") from exc
        return cls(plus, minus, pairing)

    def sort_key(self) -> tuple:
        return (self.plus.shape, self.minus.shape, self.pairing)

    def __lt__(self, other: "Couple") -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        return self.encode()


def trivial_couple() -> Couple:
    return Couple(leaf_tree(1), leaf_tree(-1), (0,))


def polarity(x: SignedTernaryTree | Couple) -> complex:
    """Product of ``i * sign`` over all branching nodes."""
    if isinstance(x, Couple):
        signs = [x.signs[b] for b in x.branching]
    else:
        signs = [x.signs[b] for b in x.branching]
    p = sum(1 for s in signs if s > 0)
    return _polarity_from_counts(p, len(signs) - p)


def _pairings(plus: SignedTernaryTree, minus: SignedTernaryTree) -> Iterator[tuple[int, ...]]:
    ps = [plus.signs[x] for x in plus.leaves]
    ms = [minus.signs[x] for x in minus.leaves]
    pos_p = [i for i, s in enumerate(ps) if s > 0]
    neg_p = [i for i, s in enumerate(ps) if s < 0]
    neg_m = [j for j, s in enumerate(ms) if s < 0]
    pos_m = [j for j, s in enumerate(ms) if s > 0]
    for perm_a in itertools.permutations(neg_m):
        for perm_b in itertools.permutations(pos_m):
            pairing = [0] * len(ps)
            for i, j in zip(pos_p, perm_a):
                pairing[i] = j
            for i, j in zip(neg_p, perm_b):
                pairing[i] = j
            yield tuple(pairing)


def enumerate_couples(n: int, limit: int | None = None) -> list[Couple]:
    """All couples of order ``n`` in canonical order (shapes, then pairing tuple)."""
    _check_limit(couple_count(n), limit, f"couples of order {n}")
    out = []
    minus_trees = enumerate_trees(n, -1)
    for plus in enumerate_trees(n, 1):
        for minus in minus_trees:
            for pairing in sorted(_pairings(plus, minus)):
                out.append(Couple(plus, minus, pairing))
    return out


# ---------------------------------------------------------------------------
# conjugacy, products, splitting
# ---------------------------------------------------------------------------


def conjugate_classes(c: Couple) -> ConjugateClassPartition:
    """Group nodes whose pair-ancestor signatures coincide."""
    groups: dict[int, list[int]] = {}
    for node, mask in enumerate(c.ancestor_masks):
        groups.setdefault(mask, []).append(node)
    classes = sorted(tuple(g) for g in groups.values())
    return ConjugateClassPartition(tuple(classes))


def _attach_maps(base_size: int, at: int, sub_size: int) -> tuple[callable, callable]:
    def old(x: int) -> int:
        return x if x < at else x + sub_size - 1

    def new(y: int) -> int:
        return at + y

    return old, new


def couple_product(base: Couple, pair: tuple[int, int] | int, attachment: Couple) -> Couple:
    """Attach ``attachment`` at the leaf pair ``pair`` of ``base``.

    ``pair`` is either a pair index or the two global leaf ids.  The
    attachment's positive root is identified with the positive-signed leaf of
    the pair and its negative root with the negative-signed leaf.
    """
    if isinstance(pair, int):
        if not 0 <= pair < len(base.pairs):
            raise InvalidPairError(f"pair index {pair} out of range")
        u, v = base.pairs[pair]
    else:
        u, v = sorted(pair)
        if (u, v) not in base.pairs:
            raise InvalidPairError(f"{pair} is not a leaf pair of the base couple")
    s0 = base.offset
    lu, lv = u, v - s0
    swapped = base.signs[u] < 0
    sub_p, sub_m = (attachment.minus, attachment.plus) if swapped else (attachment.plus, attachment.minus)
    new_plus = graft(base.plus, lu, sub_p)
    new_minus = graft(base.minus, lv, sub_m)
    s_new = new_plus.size

    old_p, new_p = _attach_maps(base.plus.size, lu, sub_p.size)
    old_m, new_m = _attach_maps(base.minus.size, lv, sub_m.size)

    def base_map(x: int) -> int:
        return old_p(x) if x < s0 else s_new + old_m(x - s0)

    s1 = attachment.offset

    def att_map(x: int) -> int:
        in_plus = x < s1
        local = x if in_plus else x - s1
        # attachment's positive tree lives in the new positive tree unless swapped
        if in_plus != swapped:
            return new_p(local)
        return s_new + new_m(local)

    pairs = [(base_map(a), base_map(b)) for (a, b) in base.pairs if (a, b) != (u, v)]
    pairs += [(att_map(a), att_map(b)) for (a, b) in attachment.pairs]
    return Couple.from_pairs(new_plus, new_minus, pairs)


def split_couple(c: Couple, cls: tuple[int, int], with_maps: bool = False):
    """Split at a size-two conjugate class, returning ``(hat, check)``.

    ``couple_product(hat, hat_pair_of_split(c, cls), check)`` reproduces
    ``c``.  With ``with_maps`` two more tuples are returned giving, for each
    node of ``hat`` and of ``check``, its global id in ``c``.
    """
    u, v = sorted(cls)
    s0 = c.offset
    if not (u < s0 <= v):
        raise InvalidPairError("a conjugate doubleton must meet both trees")
    if c.ancestor_masks[u] != c.ancestor_masks[v]:
        raise InvalidPairError(f"nodes {u} and {v} are not conjugate")
    lu, lv = u, v - s0
    hat_p, chk_a = c.plus.split(lu)
    hat_m, chk_b = c.minus.split(lv)
    swapped = c.signs[u] < 0
    chk_plus, chk_minus = (chk_b, chk_a) if swapped else (chk_a, chk_b)
    eu, ev = c.subtree_end[u], c.subtree_end[v]
    hat_s = hat_p.size
    chk_s = chk_plus.size
    du, dv = eu - u - 1, ev - v - 1

    def hat_map(x: int) -> int:
        if x < s0:
            return x if x <= u else x - du
        y = x - s0
        return hat_s + (y if y <= lv else y - dv)

    def chk_map(x: int) -> int:
        if x < s0:
            local = x - u
            return chk_s + local if swapped else local
        local = x - v
        return local if swapped else chk_s + local

    inside_pairs, outside_pairs = [], []
    for a, b in c.pairs:
        a_in = u <= a < eu
        b_in = v <= b < ev
        if a_in and b_in:
            inside_pairs.append((chk_map(a), chk_map(b)))
        elif not a_in and not b_in:
            outside_pairs.append((hat_map(a), hat_map(b)))
        else:
            raise InvalidPairError("class is not closed under the pairing")
    outside_pairs.append((hat_map(u), hat_map(v)))
    hat = Couple.from_pairs(hat_p, hat_m, outside_pairs)
    check = Couple.from_pairs(chk_plus, chk_minus, inside_pairs)
    if not with_maps:
        return hat, check
    hat_inv = [0] * hat.size
    chk_inv = [0] * check.size
    for x in range(c.size):
        inside = (u <= x < eu) or (v <= x < ev)
        if inside:
            chk_inv[chk_map(x)] = x
        if not inside or x in (u, v):
            hat_inv[hat_map(x)] = x
    return hat, check, tuple(hat_inv), tuple(chk_inv)


def hat_pair_of_split(c: Couple, cls: tuple[int, int]) -> tuple[int, int]:
    """Global ids, inside the hat couple, of the pair created by :func:`split_couple`."""
    u, v = sorted(cls)
    s0 = c.offset
    du = c.subtree_end[u] - u - 1
    return (u, s0 - du + (v - s0))


# ---------------------------------------------------------------------------
# irreducibility
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IrreducibleFactorization:
    factors: tuple[Couple, ...]
    regular_index: int

    @property
    def order(self) -> int:
        return sum(f.order for f in self.factors)

    def multiset(self) -> tuple[str, ...]:
        return tuple(sorted(f.encode() for f in self.factors))


def internal_classes(c: Couple) -> list[tuple[int, int]]:
    """Size-two classes other than the root class and the leaf pairs."""
    part = conjugate_classes(c)
    pairs = set(c.pairs)
    roots = c.roots
    return [cl for cl in part.doubletons if cl != roots and cl not in pairs]


def is_irreducible(c: Couple) -> bool:
    return c.order >= 1 and not internal_classes(c)


def _factor(c: Couple, pick: int, ids: tuple[int, ...]) -> list[tuple[Couple, tuple[int, ...]]]:
    if c.order == 0:
        return []
    cands = internal_classes(c)
    if not cands:
        return [(c, ids)]
    cl = cands[pick % len(cands)]
    hat, check, hat_inv, chk_inv = split_couple(c, cl, with_maps=True)
    return _factor(hat, pick, tuple(ids[x] for x in hat_inv)) + _factor(
        check, pick, tuple(ids[x] for x in chk_inv)
    )


def factor_branching_sets(c: Couple, pick: int = 0) -> list[tuple[Couple, frozenset[int]]]:
    """Irreducible factors together with the global ids of their branching nodes in ``c``."""
    parts = _factor(c, pick, tuple(range(c.size)))
    return [(f, frozenset(ids[b] for b in f.branching)) for f, ids in parts]


def irreducible_factorization(c: Couple, pick: int = 0) -> IrreducibleFactorization:
    """Split at internal conjugate classes until every part is irreducible.

    ``pick`` selects which available class is split at each step; the
    resulting multiset does not depend on it.
    """
    factors = sorted((f for f, _ in _factor(c, pick, tuple(range(c.size)))), key=Couple.sort_key)
    ind = sum(1 for f in factors if f.order != 1)
    return IrreducibleFactorization(tuple(factors), ind)


def regular_index(c: Couple) -> int:
    return irreducible_factorization(c).regular_index


def is_regular(c: Couple) -> bool:
    return regular_index(c) == 0


# ---------------------------------------------------------------------------
# regular couples
# ---------------------------------------------------------------------------


def _order_one(sigma: int) -> Couple:
    plus = SignedTernaryTree("BLLL", 1)
    minus = SignedTernaryTree("BLLL", -1)
    return Couple(plus, minus, (0, 1, 2) if sigma > 0 else (2, 1, 0))


def regular_product(sigma: int, q1: Couple, q2: Couple, q3: Couple) -> Couple:
    """The regular couple whose root children carry ``q1, q2, q3`` (pairing orientation ``sigma``)."""
    if sigma not in (1, -1):
        raise SignError("orientation must be +1 or -1")
    out = _order_one(sigma)
    for j, q in ((2, q3), (1, q2), (0, q1)):
        leaf = out.plus.children[0][j]
        partner = out.partner(leaf)
        out = couple_product(out, (leaf, partner), q)
    return out


def root_child_classes(c: Couple, sigma: int) -> list[tuple[int, int]]:
    """Candidate classes joining positive root child ``j`` with negative root child ``2 + sigma (j - 2)``."""
    pk = c.plus.children[0]
    mk = c.minus.children[0]
    s = c.offset
    return [(pk[j], mk[1 + sigma * (j - 1)] + s) for j in range(3)]


def regular_decomposition(c: Couple) -> tuple[int, Couple, Couple, Couple] | None:
    """Return ``(sigma, q1, q2, q3)`` with ``c = regular_product(sigma, ...)``, or None.

    Only the top-level structure is examined; the sub-couples are not
    required to be regular.
    """
    if c.order == 0:
        return None
    masks = c.ancestor_masks
    for sigma in (1, -1):
        cls = root_child_classes(c, sigma)
        if all(masks[a] == masks[b] for a, b in cls):
            subs = []
            for a, b in cls:
                _, check = split_couple(c, (a, b))
                subs.append(check)
            return (sigma, subs[0], subs[1], subs[2])
    return None


def is_regular_recursive(c: Couple) -> bool:
    """Regularity through the recursive root-children characterization."""
    if c.order == 0:
        return True
    dec = regular_decomposition(c)
    if dec is None:
        return False
    return all(is_regular_recursive(q) for q in dec[1:])


@lru_cache(maxsize=None)
def _regular(n: int) -> tuple[Couple, ...]:
    if n == 0:
        return (trivial_couple(),)
    out = []
    for n1 in range(n):
        for n2 in range(n - n1):
            n3 = n - 1 - n1 - n2
            for sigma in (1, -1):
                for q1 in _regular(n1):
                    for q2 in _regular(n2):
                        for q3 in _regular(n3):
                            out.append(regular_product(sigma, q1, q2, q3))
    return tuple(sorted(out, key=Couple.sort_key))


def enumerate_regular_couples(n: int, limit: int | None = None) -> list[Couple]:
    """All regular couples of order ``n``, built by the root-product recursion."""
    if n < 0:
        raise ValidationError("order must be non-negative")
    _check_limit(regular_couple_count(n), limit, f"regular couples of order {n}")
    return list(_regular(n))


@dataclass(frozen=True)
class FactorTree:
    """Tree of order-one factors of a regular couple, ordered by nesting.

    ``sigma`` is the pairing orientation of this factor, ``plus_root`` and
    ``minus_root`` its branching nodes (global ids in the host couple), and
    ``children`` the factor trees attached below it (0 to 3 of them).
    """

    sigma: int
    plus_root: int
    minus_root: int
    children: tuple["FactorTree", ...] = field(default_factory=tuple)

    @property
    def size(self) -> int:
        return 1 + sum(ch.size for ch in self.children)

    def nodes(self) -> list["FactorTree"]:
        out = [self]
        for ch in self.children:
            out.extend(ch.nodes())
        return out


def factor_tree(c: Couple) -> FactorTree | None:
    """Factor tree of a regular couple (None for the trivial couple)."""
    from .errors import NonRegularError

    if c.order == 0:
        return None

    def build(sub: Couple, pmap: list[int]) -> FactorTree:
        dec = regular_decomposition(sub)
        if dec is None:
            raise NonRegularError("couple is not regular")
        sigma = dec[0]
        kids = []
        for (a, b), q in zip(root_child_classes(sub, sigma), dec[1:]):
            if q.order == 0:
                continue
            swapped = sub.signs[a] < 0
            pa, pb = (b, a) if swapped else (a, b)
            ea, eb = sub.subtree_end[pa], sub.subtree_end[pb]
            qmap = list(range(pa, ea)) + list(range(pb, eb))
            kids.append(build(q, [pmap[x] for x in qmap]))
        return FactorTree(sigma, pmap[0], pmap[sub.offset], tuple(kids))

    return build(c, list(range(c.size)))
