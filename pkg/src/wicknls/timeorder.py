"""Closed-form Fourier kernels of time-ordered simplices.

For a forest ``G`` (ancestors later in time than descendants) the kernel

    Theta_t[G](w) = integral over 0 < t_n < t_m < t (n below m) of exp(2 pi i sum_g t_g w_g)

is an exponential polynomial in ``t``.  :class:`ExpPoly` carries such
functions exactly and :func:`theta` builds the kernel bottom-up: a node's
kernel is the primitive of ``exp(2 pi i s w_node)`` times the product of its
children's kernels.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from math import factorial, prod
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError

RESONANCE_TOL = 1e-12
# Below this |frequency| the exponential is replaced by its Taylor polynomial before integrating,
# which avoids dividing by tiny frequencies.  The truncation error is below 1e-9 for t <= 100.
NEAR_RESONANT = 1e-2
TAYLOR_DEGREE = 30


@dataclass(frozen=True)
class ExpPoly:
    """Finite sum of ``coeff * t**power * exp(2 pi i t freq)``.

    Terms with equal power and frequencies closer than ``RESONANCE_TOL``
    are merged; zero coefficients are pruned.
    """

    terms: tuple[tuple[complex, int, float], ...] = ()

    @staticmethod
    def build(terms, tol: float = RESONANCE_TOL) -> "ExpPoly":
        merged: list[list] = []
        for coeff, power, freq in terms:
            for row in merged:
                if row[1] == power and abs(row[2] - freq) < tol:
                    row[0] += coeff
                    break
            else:
                merged.append([complex(coeff), int(power), float(freq)])
        kept = tuple((c, p, f) for c, p, f in merged if c != 0)
        return ExpPoly(tuple(sorted(kept, key=lambda r: (r[1], r[2]))))

    @staticmethod
    def constant(c: complex) -> "ExpPoly":
        return ExpPoly.build([(c, 0, 0.0)])

    @staticmethod
    def exp(freq: float) -> "ExpPoly":
        return ExpPoly.build([(1.0, 0, freq)])

    def __add__(self, other: "ExpPoly") -> "ExpPoly":
        return ExpPoly.build(self.terms + other.terms)

    def __mul__(self, other: "ExpPoly | complex | float") -> "ExpPoly":
        if not isinstance(other, ExpPoly):
            return ExpPoly.build([(c * other, p, f) for c, p, f in self.terms])
        return ExpPoly.build(
            [(c1 * c2, p1 + p2, f1 + f2) for c1, p1, f1 in self.terms for c2, p2, f2 in other.terms]
        )

    __rmul__ = __mul__

    def primitive(self, nu: float = 0.0, tol: float = RESONANCE_TOL) -> "ExpPoly":
        """``t -> integral_0^t exp(2 pi i s nu) self(s) ds``.

        A term whose total frequency vanishes gains one power of ``t``; a
        nearly resonant one is expanded in powers of ``t`` first.
        """
        out = []
        for c, p, f in self.terms:
            lam = f + nu
            if abs(lam) < tol:
                out.append((c / (p + 1), p + 1, 0.0))
                continue
            if abs(lam) < NEAR_RESONANT:
                a = 2j * np.pi * lam
                for j in range(TAYLOR_DEGREE + 1):
                    out.append((c * a**j / (factorial(j) * (p + j + 1)), p + j + 1, 0.0))
                continue
            a = 2j * np.pi * lam
            pf = factorial(p)
            for j in range(p + 1):
                out.append((c * (-1) ** j * pf / (factorial(p - j) * a ** (j + 1)), p - j, lam))
            out.append((-c * (-1) ** p * pf / a ** (p + 1), 0, 0.0))
        return ExpPoly.build(out, tol)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        total = np.zeros(t.shape, dtype=complex)
        for c, p, f in self.terms:
            total = total + c * t**p * np.exp(2j * np.pi * f * t)
        return total if total.shape else complex(total)

    @property
    def degree(self) -> int:
        return max((p for _, p, _ in self.terms), default=0)


@dataclass(frozen=True)
class OrderedForest:
    """Forest given by parent pointers (``None`` for roots)."""

    parents: tuple[int | None, ...]

    def __post_init__(self) -> None:
        n = len(self.parents)
        for i, p in enumerate(self.parents):
            if p is not None and not 0 <= p < n:
                raise ValidationError(f"parent of {i} out of range")
        for i in range(n):  # acyclicity
            seen, node = set(), i
            while node is not None:
                if node in seen:
                    raise ValidationError("parent pointers contain a cycle")
                seen.add(node)
                node = self.parents[node]

    @property
    def size(self) -> int:
        return len(self.parents)

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        kids: list[list[int]] = [[] for _ in self.parents]
        for i, p in enumerate(self.parents):
            if p is not None:
                kids[p].append(i)
        return tuple(tuple(k) for k in kids)

    @cached_property
    def roots(self) -> tuple[int, ...]:
        return tuple(i for i, p in enumerate(self.parents) if p is None)

    @cached_property
    def descendants(self) -> tuple[tuple[int, ...], ...]:
        out = []
        for g in range(self.size):
            stack, acc = list(self.children[g]), []
            while stack:
                x = stack.pop()
                acc.append(x)
                stack.extend(self.children[x])
            out.append(tuple(sorted(acc)))
        return tuple(out)

    @cached_property
    def subtree_sizes(self) -> tuple[int, ...]:
        return tuple(1 + len(d) for d in self.descendants)

    @staticmethod
    def from_tree(tree) -> "OrderedForest":
        """Forest of branching nodes of a signed ternary tree (or couple)."""
        branching = list(tree.branching)
        index = {b: i for i, b in enumerate(branching)}
        parents = []
        for b in branching:
            p = tree.parent[b]
            parents.append(None if p is None else index[p])
        return OrderedForest(tuple(parents))

    @staticmethod
    def from_factor_tree(ft) -> "OrderedForest":
        nodes = ft.nodes()
        index = {id(n): i for i, n in enumerate(nodes)}
        parents: list[int | None] = [None] * len(nodes)
        for n in nodes:
            for ch in n.children:
                parents[index[id(ch)]] = index[id(n)]
        return OrderedForest(tuple(parents))

    @staticmethod
    def chain(n: int) -> "OrderedForest":
        return OrderedForest(tuple([None] + list(range(n - 1)))) if n else OrderedForest(())

    @staticmethod
    def antichain(n: int) -> "OrderedForest":
        return OrderedForest((None,) * n)


def _omega_array(G: OrderedForest, omega) -> np.ndarray:
    if isinstance(omega, Mapping):
        return np.array([float(omega.get(i, 0.0)) for i in range(G.size)])
    w = np.asarray(omega, dtype=float).reshape(-1)
    if w.size == 1 and G.size != 1:
        w = np.full(G.size, float(w[0]))
    if w.size != G.size:
        raise ValidationError("omega needs one frequency per node")
    return w


def theta(G: OrderedForest, omega, tol: float = RESONANCE_TOL) -> ExpPoly:
    """Exact kernel ``Theta_t[G](omega)`` as an exponential polynomial in ``t``."""
    w = _omega_array(G, omega)
    memo: dict[int, ExpPoly] = {}

    def node_kernel(g: int) -> ExpPoly:
        if g not in memo:
            inner = ExpPoly.constant(1.0)
            for ch in G.children[g]:
                inner = inner * node_kernel(ch)
            memo[g] = inner.primitive(w[g], tol)
        return memo[g]

    out = ExpPoly.constant(1.0)
    for r in G.roots:
        out = out * node_kernel(r)
    return out


def theta_value(G: OrderedForest, omega, t: float) -> complex:
    return complex(theta(G, omega)(t))


def theta_quadrature(G: OrderedForest, omega, t: float, nodes: int = 24, panels: int | None = None) -> complex:
    """``Theta_t[G](omega)`` by nested composite Gauss-Legendre integration.

    Independent of :func:`theta`; cost grows like ``(nodes * panels)^depth``,
    so it is meant for small forests.
    """
    w = _omega_array(G, omega)
    if panels is None:
        panels = max(1, int(np.ceil(abs(t) * (np.max(np.abs(w), initial=0.0) * G.size + 1))))
    x, wt = np.polynomial.legendre.leggauss(nodes)

    def rule(hi: float):
        edges = np.linspace(0.0, hi, panels + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
        half = 0.5 * np.diff(edges)[:, None]
        return (mid + half * x).reshape(-1), (half * wt).reshape(-1)

    def kernel(g: int, s: float) -> complex:
        u, uw = rule(s)
        vals = np.exp(2j * np.pi * w[g] * u)
        for ch in G.children[g]:
            vals = vals * np.array([kernel(ch, ui) for ui in u])
        return complex(np.sum(uw * vals))

    out = 1.0 + 0j
    for r in G.roots:
        out *= kernel(r, t)
    return out


def linear_extension_count(G: OrderedForest) -> int:
    """Number of linear extensions, ``n! / prod(subtree sizes)``."""
    n = G.size
    return factorial(n) // prod(G.subtree_sizes) if n else 1


def simplex_volume(G: OrderedForest, t: float = 1.0) -> float:
    """``Theta_t[G](0) = t^n e(G) / n!``."""
    n = G.size
    return t**n * linear_extension_count(G) / factorial(n)


def decay_bound(G: OrderedForest, omega, t: float) -> float:
    """``t^n max_mu prod_g 1 / <t mu(omega)_g>`` over ``mu in {0,1}^(non-roots)``."""
    if t <= 0:
        raise ValidationError("decay_bound needs t > 0")
    w = _omega_array(G, omega)
    n = G.size
    nonroots = [g for g in range(n) if G.parents[g] is not None]
    desc = G.descendants
    best = 0.0
    for bits in itertools.product((0, 1), repeat=len(nonroots)):
        mu = np.zeros(n)
        mu[nonroots] = bits
        val = 1.0
        for g in range(n):
            m = w[g] + sum(mu[x] * w[x] for x in desc[g])
            val /= np.sqrt(1.0 + (t * m) ** 2)
        best = max(best, val)
    return t**n * best
