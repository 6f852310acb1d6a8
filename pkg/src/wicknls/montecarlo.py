"""Monte Carlo sampling of the Dyson chaos amplitudes at finite ``L``.

Initial data are independent complex Gaussians ``g_k`` on the lattice modes
``|k| <= R`` with ``E|g|^2 = 1``.  The order-``n`` amplitude is the sum over
plus-trees of order ``n`` of

    i_tree (lambda / L^d)^n  sum_decorations  Theta_t(Omega) prod psi^(+-)(k_l) :prod g^(+-)_(k_l):

where the Gaussian product is Wick ordered per mode.  Sample moments are
compared with the couple sums of :func:`wicknls.spectra.finite_L_spectrum`.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from math import comb, factorial

import numba
import numpy as np

from .combinatorics import SignedTernaryTree, enumerate_couples, enumerate_trees, polarity
from .decorations import LatticeSpec, extend_leaf_assignment, resonance_vector, to_lattice_int
from .errors import BudgetError, UnsupportedError, ValidationError
from .spectra import finite_L_spectrum, scaling_lambda
from .timeorder import OrderedForest, theta

MAX_ORDER = 2


@dataclass
class GaussianField:
    """Samples of the initial Gaussians on the lattice modes.

    ``modes`` holds the lattice wavenumbers ``(M, d)`` (values in ``Z^d / L``),
    ``samples`` the complex values ``(S, M)``.
    """

    modes: np.ndarray
    samples: np.ndarray
    seed: int
    spec: LatticeSpec

    @property
    def nsamples(self) -> int:
        return self.samples.shape[0]

    def index_of(self, k) -> int:
        K = to_lattice_int(k, self.spec.L)
        hit = np.nonzero(np.all(self._int_modes == K, axis=1))[0]
        if len(hit) == 0:
            raise ValidationError(f"{k} is not a sampled mode")
        return int(hit[0])

    @property
    def _int_modes(self) -> np.ndarray:
        return np.rint(self.modes * self.spec.L).astype(np.int64)


def sample_stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for sample ``index`` under ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def sample_field(spec: LatticeSpec, seed: int, nsamples: int = 1) -> GaussianField:
    """Standard complex Gaussians (real and imaginary parts of variance 1/2) per mode."""
    if nsamples < 1:
        raise ValidationError("nsamples must be positive")
    pts = spec.ball_points()
    out = np.empty((nsamples, len(pts)), dtype=complex)
    for s in range(nsamples):
        z = sample_stream(seed, s).standard_normal((len(pts), 2))
        out[s] = (z[:, 0] + 1j * z[:, 1]) / np.sqrt(2.0)
    return GaussianField(pts / spec.L, out, int(seed), spec)


# ---------------------------------------------------------------------------
# decoration tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TreeTable:
    """Decorations of one tree: leaf mode indices, leaf signs and deterministic coefficients."""

    tree: SignedTernaryTree
    leaf_modes: np.ndarray  # (D, n_leaves) indices into the field's modes
    leaf_signs: np.ndarray  # (n_leaves,)
    coeff: np.ndarray  # (D,) complex


def tree_table(
    tree: SignedTernaryTree, t: float, k, field: GaussianField, alpha: float, profile, max_decorations: float = 5e6
) -> TreeTable:
    """All lattice decorations of ``tree`` with root ``k`` and every leaf on a sampled mode."""
    spec = field.spec
    L, d = spec.L, spec.d
    K = to_lattice_int(k, L)
    modes = field._int_modes
    r = int(np.max(np.abs(modes))) if len(modes) else 0
    dense = np.full((2 * r + 1,) * d, -1, dtype=np.int64)
    dense[tuple((modes + r).T)] = np.arange(len(modes))

    def lookup(vals: np.ndarray) -> np.ndarray:
        inside = np.all(np.abs(vals) <= r, axis=-1)
        out = np.full(vals.shape[:-1], -1, dtype=np.int64)
        out[inside] = dense[tuple((vals[inside] + r).T)]
        return out

    leaves = tree.leaves
    signs = np.array([tree.signs[l] for l in leaves])
    nfree = len(leaves) - 1
    if float(len(modes)) ** nfree > max_decorations:
        raise BudgetError(f"{len(modes)}^{nfree} candidate decorations exceed the budget {max_decorations:.3g}")
    n = tree.order
    scale = polarity(tree) * (scaling_lambda(L, alpha) / L**d) ** n
    if n == 0:
        i = int(lookup(K[None, :])[0])
        if i < 0:
            return TreeTable(tree, np.zeros((0, 1), np.int64), signs, np.zeros(0, complex))
        return TreeTable(tree, np.array([[i]]), signs, np.array([complex(profile.psi(K / L))]))
    # root value = sum_l s_root s_l v_l; solve for the last leaf
    grids = np.meshgrid(*[np.arange(len(modes))] * nfree, indexing="ij")
    idx = np.stack([g.reshape(-1) for g in grids], axis=1)
    free = modes[idx]  # (B, nfree, d)
    root_sign = tree.signs[0]
    partial = np.einsum("l,bld->bd", root_sign * signs[:nfree], free)
    last = root_sign * signs[-1] * (K[None, :] - partial)
    last_idx = lookup(last)
    ok = last_idx >= 0
    idx, last_idx = idx[ok], last_idx[ok]
    leaf_modes = np.concatenate([idx, last_idx[:, None]], axis=1)
    leaf_vals = modes[leaf_modes] / L  # (D, n_leaves, d)
    dec = extend_leaf_assignment(tree, leaf_vals, "D", method="closed")
    omega = resonance_vector(tree, dec)  # (D, n)
    G = OrderedForest.from_tree(tree)
    psi = profile.psi(leaf_vals.reshape(-1, d)).reshape(leaf_vals.shape[:2])
    psi = np.where(signs[None, :] > 0, psi, np.conj(psi))
    # round the integer resonances so equal kernels are built once
    keys = np.rint(omega * L * L).astype(np.int64)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    kern = np.array([complex(theta(G, row / (L * L))(t)) for row in uniq])
    coeff = scale * kern[inv.reshape(-1)] * np.prod(psi, axis=1)
    return TreeTable(tree, leaf_modes, signs, coeff)


# ---------------------------------------------------------------------------
# Wick-ordered products
# ---------------------------------------------------------------------------


def wick_monomial(g: complex | np.ndarray, p: int, q: int):
    """Wick power ``:g^p gbar^q:`` of a standard complex Gaussian."""
    out = 0
    for j in range(min(p, q) + 1):
        out = out + (-1) ** j * factorial(j) * comb(p, j) * comb(q, j) * g ** (p - j) * np.conj(g) ** (q - j)
    return out


@numba.njit(cache=True)
def _wick_monomial(g, p, q):
    out = 0j
    for j in range(min(p, q) + 1):
        cj = 1.0
        for i in range(j):
            cj *= (p - i) * (q - i) / (i + 1.0)
        out += (-1.0) ** j * cj * g ** (p - j) * np.conj(g) ** (q - j)
    return out


@numba.njit(cache=True)
def _amplitudes(samples_t, leaf_modes, leaf_signs, coeff, out):
    """Accumulate ``coeff * :prod g:`` into ``out``; ``samples_t`` is mode-major ``(M, S)``."""
    S = samples_t.shape[1]
    D, nl = leaf_modes.shape
    distinct = np.empty(nl, np.int64)
    pc = np.empty(nl, np.int64)
    qc = np.empty(nl, np.int64)
    v = np.empty(S, dtype=np.complex128)
    for dd in range(D):
        nd = 0
        for l in range(nl):
            md = leaf_modes[dd, l]
            pos = -1
            for u in range(nd):
                if distinct[u] == md:
                    pos = u
                    break
            if pos < 0:
                distinct[nd] = md
                pc[nd] = 0
                qc[nd] = 0
                pos = nd
                nd += 1
            if leaf_signs[l] > 0:
                pc[pos] += 1
            else:
                qc[pos] += 1
        c = coeff[dd]
        for s in range(S):
            v[s] = c
        for u in range(nd):
            row = samples_t[distinct[u]]
            p, q = pc[u], qc[u]
            if q == 0 and p == 1:
                for s in range(S):
                    v[s] *= row[s]
            elif p == 0 and q == 1:
                for s in range(S):
                    v[s] *= np.conj(row[s])
            else:
                for s in range(S):
                    v[s] *= _wick_monomial(row[s], p, q)
        for s in range(S):
            out[s] += v[s]


def dyson_amplitude(
    n: int, t: float, k, field: GaussianField, L: float, alpha: float, profile, max_decorations: float = 5e6
) -> np.ndarray:
    """Order-``n`` chaos amplitude at ``(t, k)`` for every sample of ``field``, shape ``(S,)``."""
    if n not in range(MAX_ORDER + 1):
        raise UnsupportedError(f"dyson_amplitude supports orders 0..{MAX_ORDER}")
    if not 0 < alpha < 2:
        raise ValidationError("alpha must lie in (0, 2)")
    if abs(field.spec.L - L) > 1e-12:
        raise ValidationError("field was sampled on a different lattice")
    out = np.zeros(field.nsamples, dtype=complex)
    samples_t = np.ascontiguousarray(field.samples.T)
    for tree in enumerate_trees(n, 1):
        tab = tree_table(tree, t, k, field, alpha, profile, max_decorations)
        if len(tab.coeff):
            _amplitudes(samples_t, tab.leaf_modes, tab.leaf_signs.astype(np.int64), tab.coeff, out)
    return out


# ---------------------------------------------------------------------------
# cross-checks
# ---------------------------------------------------------------------------


@dataclass
class WickReport:
    n: int
    n_prime: int
    k: list[float]
    k_prime: list[float]
    nsamples: int
    mc_estimate: complex
    stderr: float
    diagrammatic: complex
    z_score: float

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("mc_estimate", "diagrammatic"):
            v = complex(out[key])
            out[key] = {"re": v.real, "im": v.imag}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def sample_moment(x: np.ndarray, y: np.ndarray) -> tuple[complex, float]:
    """Mean of ``x * conj(y)`` and its standard error ``sqrt(E|X - mean|^2 / S)``."""
    prod = x * np.conj(y)
    mean = complex(prod.mean())
    se = float(np.sqrt(np.mean(np.abs(prod - mean) ** 2) / len(prod)))
    return mean, se


def diagrammatic_target(n: int, t: float, k, L: float, alpha: float, profile, radius: float) -> complex:
    """Sum of ``finite_L_spectrum`` over all couples of order ``n``."""
    return complex(sum(finite_L_spectrum(c, t, k, L, alpha, profile, radius=radius, max_decorations=1e8)
                       for c in enumerate_couples(n)))


def wick_crosscheck(
    n: int,
    n_prime: int,
    t: float,
    k,
    k_prime,
    L: float,
    alpha: float,
    profile,
    nsamples: int = 10_000,
    seed: int = 0,
    radius: float | None = None,
    field: GaussianField | None = None,
) -> WickReport:
    """Compare the sample mean of ``J^n_k conj(J^n'_k')`` with its diagrammatic value."""
    R = profile.support_radius() if radius is None else float(radius)
    if field is None:
        field = sample_field(LatticeSpec(L, profile.d, R), seed, nsamples)
    a = dyson_amplitude(n, t, k, field, L, alpha, profile)
    same = n == n_prime and np.allclose(np.asarray(k, float), np.asarray(k_prime, float))
    b = a if same else dyson_amplitude(n_prime, t, k_prime, field, L, alpha, profile)
    est, se = sample_moment(a, b)
    target = diagrammatic_target(n, t, k, L, alpha, profile, R) if same else 0j
    z = abs(est - target) / se if se > 0 else (0.0 if est == target else np.inf)
    return WickReport(n, n_prime, [float(v) for v in np.atleast_1d(k)], [float(v) for v in np.atleast_1d(k_prime)],
                      field.nsamples, est, se, target, float(z))


__all__ = [
    "GaussianField",
    "TreeTable",
    "WickReport",
    "sample_field",
    "sample_stream",
    "tree_table",
    "wick_monomial",
    "dyson_amplitude",
    "sample_moment",
    "diagrammatic_target",
    "wick_crosscheck",
]
