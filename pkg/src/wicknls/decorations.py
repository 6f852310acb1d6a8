"""Decorations of trees and couples, resonance functions and lattice counting.

A decoration assigns a vector in R^d to every node.  Values are stored as an
array of shape ``(..., N, d)`` indexed by node id (global ids for couples).
The momentum-kind (``"D"``) rule is ``s_b v_b = sum_c s_c v_c`` over the
three children ``c`` of a branching node ``b`` (signs ``s``); the
position-kind (``"C"``) rule is ``v_b = sum_c v_c``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Literal, Mapping, Sequence

import numba
import numpy as np

from .combinatorics import (
    Couple,
    FactorTree,
    SignedTernaryTree,
    factor_branching_sets,
    factor_tree,
)
from .errors import BudgetError, DimensionError, NonRegularError, ValidationError

Kind = Literal["D", "C"]
Host = SignedTernaryTree | Couple


def resonance_factor(k1, k2, k3) -> np.ndarray | float:
    """Phase factor 1/2 (|k1-k2+k3|^2 - |k1|^2 + |k2|^2 - |k3|^2) over the last axis."""
    k1, k2, k3 = (np.asarray(v, dtype=float) for v in (k1, k2, k3))
    if not (k1.shape[-1:] == k2.shape[-1:] == k3.shape[-1:]):
        raise DimensionError("resonance_factor: vectors must share dimension")
    k = k1 - k2 + k3
    sq = lambda v: np.sum(v * v, axis=-1)  # noqa: E731
    return 0.5 * (sq(k) - sq(k1) + sq(k2) - sq(k3))


# ---------------------------------------------------------------------------
# host structure helpers
# ---------------------------------------------------------------------------


def _host_arrays(host: Host):
    """(signs, children, parent, leaves, branching) with global ids."""
    return host.signs, host.children, host.parent, host.leaves, host.branching


def leaf_coefficients(host: Host, kind: Kind = "D") -> np.ndarray:
    """Integer matrix ``A`` with ``v_n = sum_l A[n, l] v_l`` over the leaves ``l`` (closed form).

    Columns follow ``host.leaves``.  For ``D`` the entry is ``s_n s_l`` when
    ``n`` is an ancestor of (or equal to) ``l``; for ``C`` it is 1.
    """
    signs, _, _, leaves, _ = _host_arrays(host)
    n = len(signs)
    ends = host.subtree_end
    A = np.zeros((n, len(leaves)), dtype=np.int64)
    for node in range(n):
        for j, leaf in enumerate(leaves):
            if node <= leaf < ends[node]:
                A[node, j] = signs[node] * signs[leaf] if kind == "D" else 1
    return A


def pair_coefficients(c: Couple, kind: Kind = "D") -> np.ndarray:
    """Integer matrix mapping the ``2n+1`` pair values of a couple to all node values."""
    A = leaf_coefficients(c, kind)
    index = {leaf: j for j, leaf in enumerate(c.leaves)}
    P = np.zeros((c.size, len(c.pairs)), dtype=np.int64)
    for p, (a, b) in enumerate(c.pairs):
        P[:, p] = A[:, index[a]] + A[:, index[b]]
    return P


def pair_root_coefficients(c: Couple) -> np.ndarray:
    """Row ``r`` with root value ``k = r . pair_values`` (D-kind); entries are +-1."""
    return pair_coefficients(c, "D")[0]


@dataclass(frozen=True)
class Decoration:
    """Node values of a tree or couple.

    Attributes
    ----------
    values : ndarray, shape (N, d)
        Value of each node, indexed by (global) node id.
    kind : {"D", "C"}
        Momentum-type or position-type Kirchhoff rule.
    host : SignedTernaryTree or Couple
    """

    values: np.ndarray
    kind: Kind
    host: Host

    @property
    def d(self) -> int:
        return int(self.values.shape[-1])

    def residual(self) -> float:
        """Largest violation of the branching rule and of the pairing constraint."""
        return decoration_residual(self.host, self.values, self.kind)

    def leaf_values(self) -> np.ndarray:
        return self.values[list(self.host.leaves)]

    def pair_values(self) -> np.ndarray:
        if not isinstance(self.host, Couple):
            raise ValidationError("pair values exist only on couples")
        return self.values[[a for a, _ in self.host.pairs]]


def decoration_residual(host: Host, values: np.ndarray, kind: Kind) -> float:
    signs, children, _, _, branching = _host_arrays(host)
    v = np.asarray(values, dtype=float)
    worst = 0.0
    for b in branching:
        kids = children[b]
        if kind == "D":
            rhs = sum(signs[c] * v[..., c, :] for c in kids)
            lhs = signs[b] * v[..., b, :]
        else:
            rhs = sum(v[..., c, :] for c in kids)
            lhs = v[..., b, :]
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    if isinstance(host, Couple):
        for a, b in host.pairs:
            worst = max(worst, float(np.max(np.abs(v[..., a, :] - v[..., b, :]))))
        r0, r1 = host.roots
        worst = max(worst, float(np.max(np.abs(v[..., r0, :] - v[..., r1, :]))))
    return worst


def _leaf_array(host: Host, leaf_values) -> np.ndarray:
    leaves = host.leaves
    if isinstance(leaf_values, Mapping):
        missing = [l for l in leaves if l not in leaf_values]
        if missing:
            raise ValidationError(f"missing leaf values for {missing}")
        arr = np.stack([np.asarray(leaf_values[l], dtype=float) for l in leaves], axis=-2)
    else:
        arr = np.asarray(leaf_values, dtype=float)
        if arr.shape[-2] != len(leaves):
            raise ValidationError("leaf value array must have one row per leaf")
    return arr


def extend_leaf_assignment(host: Host, leaf_values, kind: Kind = "D", method: str = "recursive") -> Decoration:
    """Unique decoration with the given leaf values.

    ``leaf_values`` is a mapping leaf id -> vector or an array of shape
    ``(n_leaves, d)`` in the order of ``host.leaves``.  ``method`` selects a
    bottom-up fill (``"recursive"``) or the closed-form ancestor sum
    (``"closed"``); both give the same values.
    """
    arr = _leaf_array(host, leaf_values)
    if isinstance(host, Couple):
        index = {leaf: j for j, leaf in enumerate(host.leaves)}
        for a, b in host.pairs:
            if not np.allclose(arr[..., index[a], :], arr[..., index[b], :], rtol=0, atol=1e-12):
                raise ValidationError(f"paired leaves {a} and {b} carry different values")
    if method == "closed":
        A = leaf_coefficients(host, kind).astype(float)
        values = np.einsum("nl,...ld->...nd", A, arr)
        return Decoration(values, kind, host)
    if method != "recursive":
        raise ValidationError(f"unknown method {method!r}")
    signs, children, _, leaves, branching = _host_arrays(host)
    shape = arr.shape[:-2] + (len(signs), arr.shape[-1])
    values = np.zeros(shape)
    for j, leaf in enumerate(leaves):
        values[..., leaf, :] = arr[..., j, :]
    for b in sorted(branching, reverse=True):
        kids = children[b]
        if kind == "D":
            values[..., b, :] = signs[b] * sum(signs[c] * values[..., c, :] for c in kids)
        else:
            values[..., b, :] = sum(values[..., c, :] for c in kids)
    return Decoration(values, kind, host)


def decoration_from_pairs(c: Couple, pair_values, kind: Kind = "D") -> Decoration:
    """Decoration of a couple from one value per leaf pair (order of ``c.pairs``)."""
    pv = np.asarray(pair_values, dtype=float)
    P = pair_coefficients(c, kind).astype(float)
    return Decoration(np.einsum("np,...pd->...nd", P, pv), kind, c)


def resonance_vector(c: Host, dec: Decoration | np.ndarray) -> np.ndarray:
    """Resonance function at every branching node (order of ``c.branching``).

    At a node of sign ``s`` with children values ``(k1, k2, k3)`` the value is
    ``s * resonance_factor(k1, k2, k3)``.
    """
    if isinstance(dec, Decoration):
        if dec.kind != "D":
            raise ValidationError("resonance functions need a D-kind decoration")
        values = dec.values
    else:
        values = np.asarray(dec, dtype=float)
    signs, children = c.signs, c.children
    out = []
    for b in c.branching:
        c1, c2, c3 = children[b]
        out.append(signs[b] * resonance_factor(values[..., c1, :], values[..., c2, :], values[..., c3, :]))
    return np.stack(out, axis=-1) if out else np.zeros(values.shape[:-2] + (0,))


def universal_decoration(c: Couple) -> np.ndarray:
    """Integer node values in Z^pairs obtained from unit pair values (one axis per pair)."""
    return pair_coefficients(c, "D")


def conjugate_classes_by_decoration(c: Couple) -> list[tuple[int, ...]]:
    """Conjugacy through equality of all integer decorations."""
    U = universal_decoration(c)
    groups: dict[tuple, list[int]] = {}
    for node in range(c.size):
        groups.setdefault(tuple(U[node]), []).append(node)
    return sorted(tuple(g) for g in groups.values())


# ---------------------------------------------------------------------------
# change of variables for regular couples
# ---------------------------------------------------------------------------


def _factor_list(c: Couple) -> list[FactorTree]:
    ft = factor_tree(c)
    return [] if ft is None else ft.nodes()


def _branch_coordinate_map(c: Couple) -> dict[int, tuple[int, int, int]]:
    """For each branching node: (factor index, index used as X, sign), (factor, index used as Y, sign).

    Returned as ``node -> (f, sx, sy, swap)`` packed so that
    ``X_b = sx * z[f, swap]`` and ``Y_b = sy * z[f, 1 - swap]``.
    """
    out: dict[int, tuple[int, int, int, int]] = {}
    for f, node in enumerate(_factor_list(c)):
        out[node.plus_root] = (f, 1, 1, 0)
        if node.sigma > 0:
            out[node.minus_root] = (f, -1, -1, 0)
        else:
            out[node.minus_root] = (f, -1, -1, 1)
    return out


def change_of_variables(c: Couple, k, z) -> Decoration:
    """Decoration of a regular couple from its root value and factor coordinates.

    ``z`` has shape ``(..., n_factors, 2, d)``: the pair ``(x, y)`` of each
    order-one factor in the pre-order of :func:`factor_tree`.  At the
    positive branching node ``b`` of a factor, ``s_b x = v_b - v_{b,1}`` and
    ``s_b y = v_b - v_{b,3}``.
    """
    if not _is_regular_quick(c):
        raise NonRegularError("change of variables needs a regular couple")
    k = np.asarray(k, dtype=float)
    z = np.asarray(z, dtype=float)
    nf = len(_factor_list(c))
    if z.shape[-3:-2] != (nf,) and nf > 0:
        raise ValidationError(f"expected {nf} factor coordinate pairs")
    batch = np.broadcast_shapes(k.shape[:-1], z.shape[:-3]) if nf else k.shape[:-1]
    d = k.shape[-1]
    values = np.zeros(batch + (c.size, d))
    coord = _branch_coordinate_map(c)
    signs, children = c.signs, c.children
    for root in c.roots:
        values[..., root, :] = k
    for b in c.branching:  # pre-order inside each tree, parents first
        f, sx, sy, swap = coord[b]
        X = sx * z[..., f, swap, :]
        Y = sy * z[..., f, 1 - swap, :]
        c1, c2, c3 = children[b]
        s = signs[b]
        values[..., c1, :] = values[..., b, :] - s * X
        values[..., c3, :] = values[..., b, :] - s * Y
        values[..., c2, :] = values[..., b, :] - s * (X + Y)
    return Decoration(values, "D", c)


def coords_from_decoration(c: Couple, dec: Decoration | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`change_of_variables`: returns ``(k, z)``."""
    values = dec.values if isinstance(dec, Decoration) else np.asarray(dec, dtype=float)
    factors = _factor_list(c)
    signs, children = c.signs, c.children
    z = []
    for node in factors:
        b = node.plus_root
        c1, _, c3 = children[b]
        s = signs[b]
        z.append(np.stack([s * (values[..., b, :] - values[..., c1, :]), s * (values[..., b, :] - values[..., c3, :])], axis=-2))
    k = values[..., 0, :]
    if not z:
        return k, np.zeros(values.shape[:-2] + (0, 2, values.shape[-1]))
    return k, np.stack(z, axis=-3)


def _is_regular_quick(c: Couple) -> bool:
    from .combinatorics import is_regular_recursive

    return is_regular_recursive(c)


def coordinate_matrix(c: Couple) -> np.ndarray:
    """Integer matrix taking ``(k, x_1, y_1, ..., x_n, y_n)`` (scalar, d=1) to the pair values."""
    nf = len(_factor_list(c))
    cols = []
    for j in range(2 * nf + 1):
        k = np.zeros(1)
        z = np.zeros((nf, 2, 1))
        if j == 0:
            k[0] = 1.0
        else:
            z[(j - 1) // 2, (j - 1) % 2, 0] = 1.0
        dec = change_of_variables(c, k, z)
        cols.append(dec.pair_values()[:, 0])
    return np.rint(np.array(cols).T).astype(np.int64)


def lambda_matrix(c: Couple) -> np.ndarray:
    """Integer matrix taking the ``2n+1`` pair values (d=1) to the ``2n`` factor coordinates."""
    P = pair_coefficients(c, "D")
    rows = []
    for node in _factor_list(c):
        b = node.plus_root
        c1, _, c3 = c.children[b]
        s = c.signs[b]
        rows.append(s * (P[b] - P[c1]))
        rows.append(s * (P[b] - P[c3]))
    return np.array(rows, dtype=np.int64).reshape(-1, len(c.pairs))


def exact_rank(M: np.ndarray) -> int:
    """Rank of an integer matrix by fraction-exact Gaussian elimination."""
    rows = [[Fraction(int(x)) for x in r] for r in np.asarray(M)]
    if not rows:
        return 0
    ncol = len(rows[0])
    rank = 0
    for col in range(ncol):
        piv = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for r in range(len(rows)):
            if r != rank and rows[r][col] != 0:
                f = rows[r][col] / rows[rank][col]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[rank])]
        rank += 1
    return rank


def exact_det(M: np.ndarray) -> int:
    """Determinant of a square integer matrix (Bareiss fraction-free elimination)."""
    a = [[int(x) for x in r] for r in np.asarray(M)]
    n = len(a)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((r for r in range(k + 1, n) if a[r][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def exact_nullspace(M: np.ndarray) -> list[list[Fraction]]:
    """Basis of the rational nullspace of an integer matrix."""
    rows = [[Fraction(int(x)) for x in r] for r in np.asarray(M)]
    ncol = np.asarray(M).shape[1]
    pivots: list[int] = []
    r = 0
    for col in range(ncol):
        piv = next((i for i in range(r, len(rows)) if rows[i][col] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        lead = rows[r][col]
        rows[r] = [x / lead for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][col] != 0:
                f = rows[i][col]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(col)
        r += 1
    free = [j for j in range(ncol) if j not in pivots]
    basis = []
    for fj in free:
        vec = [Fraction(0)] * ncol
        vec[fj] = Fraction(1)
        for i, pc in enumerate(pivots):
            vec[pc] = -rows[i][fj]
        basis.append(vec)
    return basis


# ---------------------------------------------------------------------------
# quadratic-form representation of the resonance function
# ---------------------------------------------------------------------------


def gamma_matrices(c: Couple) -> np.ndarray:
    """Integer symmetric matrices ``M_b`` with ``2 Omega_b = p^T M_b p`` in the pair values ``p``.

    ``M_b = s_b G_b - sum_children s_c G_c`` where ``G_n`` is the outer
    product of node ``n``'s pair-coefficient row with itself.
    """
    P = pair_coefficients(c, "D")
    signs, children = c.signs, c.children
    out = []
    for b in c.branching:
        M = signs[b] * np.outer(P[b], P[b])
        for ch in children[b]:
            M = M - signs[ch] * np.outer(P[ch], P[ch])
        out.append(M)
    return np.array(out, dtype=np.int64)


def resonance_relations(c: Couple) -> tuple[list[list[Fraction]], list[frozenset[int]]]:
    """Nullspace of ``mu -> sum_b mu_b M_b`` and the factor branching sets (as index sets)."""
    G = gamma_matrices(c)
    nb = G.shape[0]
    A = G.reshape(nb, -1).T
    basis = exact_nullspace(A)
    pos = {b: i for i, b in enumerate(c.branching)}
    blocks = [frozenset(pos[x] for x in s) for _, s in factor_branching_sets(c)]
    return basis, blocks


def locally_constant_check(c: Couple) -> bool:
    """True when the relations among the resonance functions are exactly the factor indicators."""
    G = gamma_matrices(c)
    nb = G.shape[0]
    A = G.reshape(nb, -1).T
    basis, blocks = resonance_relations(c)
    if len(basis) != len(blocks):
        return False
    for blk in blocks:
        mu = np.array([1 if i in blk else 0 for i in range(nb)], dtype=np.int64)
        if np.any(A @ mu != 0):
            return False
    # the block indicators are independent since blocks are disjoint
    return exact_rank(A) == nb - len(blocks)


# ---------------------------------------------------------------------------
# lattice decorations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice (Z/L)^d truncated to the closed Euclidean ball of radius ``radius``."""

    L: float
    d: int
    radius: float

    def __post_init__(self) -> None:
        if self.L <= 0 or self.d < 1 or self.radius <= 0:
            raise ValidationError("LatticeSpec needs L > 0, d >= 1, radius > 0")

    @property
    def int_radius_sq(self) -> float:
        return (self.radius * self.L) ** 2

    def ball_points(self) -> np.ndarray:
        """Integer coordinates ``X`` with ``|X / L| <= radius`` (lexicographic order)."""
        return ball_points(self.d, self.radius * self.L)


def ball_points(d: int, int_radius: float) -> np.ndarray:
    m = int(np.floor(int_radius + 1e-12))
    axis = np.arange(-m, m + 1)
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    keep = np.sum(grid * grid, axis=1) <= int_radius * int_radius + 1e-9
    return grid[keep].astype(np.int64)


def to_lattice_int(k, L: float) -> np.ndarray:
    X = np.asarray(k, dtype=float) * L
    Xi = np.rint(X)
    if np.max(np.abs(X - Xi), initial=0.0) > 1e-9:
        raise ValidationError("vector is not on the lattice (Z/L)^d")
    return Xi.astype(np.int64)


def lattice_decoration_arrays(
    c: Couple,
    k,
    spec: LatticeSpec,
    bound: str = "nodes",
    chunk: int = 200_000,
    max_candidates: float = 5e8,
) -> Iterator[np.ndarray]:
    """Yield integer node-value arrays ``(B, N, d)`` (true values are ``array / L``).

    The first leaf pair is solved from the root constraint; the other ``2n``
    pair values range over the ball.  ``bound="nodes"`` keeps decorations
    whose every node lies in the ball, ``bound="pairs"`` only constrains the
    pair values.
    """
    K = to_lattice_int(k, spec.L)
    r2 = spec.int_radius_sq + 1e-9
    if float(K @ K) > r2:
        return
    P = pair_coefficients(c, "D")
    root = P[0]
    npairs = P.shape[1]
    pts = spec.ball_points()
    pair_nodes = np.array([a for a, _ in c.pairs])
    nfree = npairs - 1
    total = float(len(pts)) ** nfree
    if total > max_candidates:
        raise BudgetError(f"{total:.3g} candidate decorations exceed the budget {max_candidates:.3g}")
    if nfree == 0:
        pv = (root[0] * K)[None, None, :]
        vals = np.einsum("np,bpd->bnd", P, pv)
        if _accept(vals, pair_nodes, r2, bound).all():
            yield vals
        return
    # index tuples over the free pairs, streamed in chunks
    n = len(pts)
    per = max(1, chunk)
    for start in range(0, n**nfree, per):
        idx = np.arange(start, min(start + per, n**nfree), dtype=np.int64)
        digits = []
        rem = idx
        for _ in range(nfree):
            digits.append(rem % n)
            rem = rem // n
        free_vals = np.stack([pts[dg] for dg in reversed(digits)], axis=1)  # (B, nfree, d)
        # root constraint: root[0] * v0 + sum root[j] v_j = K
        v0 = root[0] * (K[None, :] - np.einsum("p,bpd->bd", root[1:], free_vals))
        pv = np.concatenate([v0[:, None, :], free_vals], axis=1)
        vals = np.einsum("np,bpd->bnd", P, pv)
        ok = _accept(vals, pair_nodes, r2, bound)
        if ok.any():
            yield vals[ok]


def _accept(vals: np.ndarray, pair_nodes: np.ndarray, r2: float, bound: str) -> np.ndarray:
    norms = np.sum(vals * vals, axis=-1)
    if bound == "nodes":
        return np.all(norms <= r2, axis=-1)
    if bound == "pairs":
        return np.all(norms[:, pair_nodes] <= r2, axis=-1)
    raise ValidationError(f"unknown bound {bound!r}")


def enumerate_lattice_decorations(
    c: Couple, k, spec: LatticeSpec, bound: str = "nodes"
) -> Iterator[Decoration]:
    """Stream every lattice D-decoration of ``c`` with root value ``k`` inside the ball."""
    for block in lattice_decoration_arrays(c, k, spec, bound=bound):
        for row in block:
            yield Decoration(row / spec.L, "D", c)


def count_lattice_decorations(c: Couple, k, spec: LatticeSpec, bound: str = "nodes") -> int:
    return int(sum(len(b) for b in lattice_decoration_arrays(c, k, spec, bound=bound)))


# ---------------------------------------------------------------------------
# quasi-resonant counting
# ---------------------------------------------------------------------------


def integer_resonance(c: Couple, vals: np.ndarray) -> np.ndarray:
    """``L^2 * Omega_b`` for integer node values (exact integers), shape ``(B, n_branching)``."""
    signs, children = c.signs, c.children
    out = []
    for b in c.branching:
        c1, _, c3 = children[b]
        v = vals[:, b, :]
        out.append(signs[b] * np.sum((v - vals[:, c1, :]) * (v - vals[:, c3, :]), axis=-1))
    return np.stack(out, axis=-1)


def _interval_bounds(Q, nb: int, gamma: float, L: float) -> np.ndarray:
    """Convert ``gamma * Omega in Q`` to bounds on the integer ``L^2 Omega`` (inclusive, float)."""
    Q = np.asarray(Q, dtype=float)
    if Q.ndim == 1:
        Q = np.tile(Q, (nb, 1))
    if Q.shape != (nb, 2):
        raise ValidationError("Q must be one interval or one interval per branching node")
    if gamma == 0:
        return Q  # marker: handled by caller
    lo = Q[:, 0] * L * L / gamma
    hi = Q[:, 1] * L * L / gamma
    return np.stack([lo, hi], axis=1)


def count_quasi_resonant(
    c: Couple,
    k,
    spec: LatticeSpec,
    Q=(-1.0, 1.0),
    gamma: float = 1.0,
    method: str = "auto",
    max_candidates: float = 5e8,
) -> int:
    """Number of lattice decorations in the ball with ``gamma * Omega_b in Q_b`` for every branching ``b``.

    ``method="exhaustive"`` scans all candidate decorations; ``"auto"`` uses
    an exact factorized counter when one is available for the couple (order
    one, and the order-two couple of :func:`nonregular_order2_couple`).
    """
    nb = len(c.branching)
    bounds = _interval_bounds(Q, nb, gamma, spec.L)
    if gamma == 0:
        inside = np.all((bounds[:, 0] <= 0) & (0 <= bounds[:, 1]))
        return count_lattice_decorations(c, k, spec) if inside else 0
    K = to_lattice_int(k, spec.L)
    if method == "auto":
        fast = _fast_counter(c, K, spec, bounds)
        if fast is not None:
            return fast
        method = "exhaustive"
    if method != "exhaustive":
        raise ValidationError(f"unknown method {method!r}")
    total = 0
    eps = 1e-9
    for vals in lattice_decoration_arrays(c, k, spec, max_candidates=max_candidates):
        om = integer_resonance(c, vals)
        ok = np.all((om >= bounds[:, 0] - eps) & (om <= bounds[:, 1] + eps), axis=1)
        total += int(ok.sum())
    return total


def nonregular_order2_couple() -> Couple:
    """An order-two couple of regular index one used in the counting experiments."""
    plus = SignedTernaryTree("BBLLLLL", 1)
    minus = SignedTernaryTree("BBLLLLL", -1)
    return Couple(plus, minus, (4, 3, 2, 1, 0))


def _symmetric_bound(bounds: np.ndarray) -> float | None:
    lo, hi = bounds[:, 0], bounds[:, 1]
    if np.allclose(lo, -hi) and np.allclose(hi, hi[0]):
        return float(np.floor(hi[0] + 1e-9))
    return None


def _fast_counter(c: Couple, K: np.ndarray, spec: LatticeSpec, bounds: np.ndarray) -> int | None:
    cap = _symmetric_bound(bounds)
    if cap is None or np.any(K != 0):
        return None
    pts = spec.ball_points()
    r2 = int(np.floor(spec.int_radius_sq + 1e-9))
    if c.order == 1:
        return int(_count_order1(pts, r2, int(cap)))
    if c == nonregular_order2_couple():
        return int(_count_nonregular2(pts, r2, int(cap), int(np.ceil(spec.radius * spec.L))))
    return None


@numba.njit(cache=True)
def _count_order1(pts, r2, cap):
    # root 0: pair values a, c free, middle pair a + c; resonance a . c
    n, d = pts.shape
    total = 0
    for i in range(n):
        for j in range(n):
            s2 = 0
            dot = 0
            for t in range(d):
                s = pts[i, t] + pts[j, t]
                s2 += s * s
                dot += pts[i, t] * pts[j, t]
            if s2 <= r2 and -cap <= dot <= cap:
                total += 1
    return total


@numba.njit(cache=True)
def _in_ball_sum(pts, i, j, r2):
    s2 = 0
    for t in range(pts.shape[1]):
        s = pts[i, t] + pts[j, t]
        s2 += s * s
    return s2 <= r2


@numba.njit(cache=True)
def _count_nonregular2(pts, r2, cap, rint):
    # In unimodular coordinates (P, Q, R, S) the four resonance constraints read
    # |P.Q|, |R.S|, |S.(Q+R)|, |Q.(P+S)| <= cap; the count factorizes over (Q, S)
    # into F(Q, Q.S) * F(S, Q.S) (Q, S, Q+S in the ball) with F(Q, t) = #{U : U, U+Q in ball, |Q.U| <= cap, |Q.U - t| <= cap}.
    n, d = pts.shape
    span = 2 * rint * rint * d + 1
    off = rint * rint * d
    # prefix[i, m] = #{U : U, U + Q_i in ball, Q_i . U < m - off}
    prefix = np.zeros((n, span + 1), dtype=np.int64)
    for i in range(n):
        hist = np.zeros(span, dtype=np.int64)
        for j in range(n):
            if _in_ball_sum(pts, i, j, r2):
                dot = 0
                for t in range(d):
                    dot += pts[i, t] * pts[j, t]
                hist[dot + off] += 1
        acc = 0
        for m in range(span):
            prefix[i, m] = acc
            acc += hist[m]
        prefix[i, span] = acc
    total = 0
    for i in range(n):
        for j in range(n):
            if not _in_ball_sum(pts, i, j, r2):
                continue
            t = 0
            for a in range(d):
                t += pts[i, a] * pts[j, a]
            lo = max(-cap, t - cap)
            hi = min(cap, t + cap)
            if lo > hi:
                continue
            lo_i = max(lo + off, 0)
            hi_i = min(hi + off + 1, span)
            if lo_i >= hi_i:
                continue
            fq = prefix[i, hi_i] - prefix[i, lo_i]
            if fq == 0:
                continue
            fs = prefix[j, hi_i] - prefix[j, lo_i]
            total += fq * fs
    return total
