"""Per-couple energy spectra: finite-lattice sums and their kinetic limits.

Conventions
-----------
* Profiles are Gaussian envelopes ``phi(x, k) = A chi(x) g(k)`` with
  ``g(k) = exp(-b |k - k0|^2)`` and ``chi(x) = prod_i h(x_i)``.  Without a
  cutoff ``h(x) = exp(-a x^2)``; with a cutoff ``c`` the Fourier transform
  of ``h`` is multiplied by a smooth bump supported in ``[-c, c]``.
* The resonant measure ``delta(Omega) dk1 dk3`` (``k2 = k1 - k + k3``) is
  integrated in the variables ``a = k1 - k`` and ``b = k3 - k`` for which
  ``Omega = a . b``: ``a`` in spherical coordinates, ``b`` on the hyperplane
  orthogonal to ``a`` with density ``1 / |a|``.
* Finite-lattice sums are accumulated on the exact integers ``L^2 Omega_b``
  so that every time kernel is evaluated once per distinct resonance vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial
from typing import Callable, Literal

import numba
import numpy as np
from numba import types
from numba.typed import Dict
from scipy.interpolate import CubicSpline

from .combinatorics import Couple, factor_tree, regular_decomposition
from .decorations import (
    Decoration,
    LatticeSpec,
    pair_coefficients,
    to_lattice_int,
)
from .errors import BudgetError, CapacityError, DimensionError, NonRegularError, ValidationError
from .timeorder import OrderedForest, simplex_volume, theta

Regime = Literal["homogeneous", "semi-homogeneous", "inhomogeneous"]
REGIMES = ("homogeneous", "semi-homogeneous", "inhomogeneous")


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------


def _bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    m = np.abs(u) < 1
    out[m] = np.exp(1.0 - 1.0 / (1.0 - u[m] ** 2))
    return out


@dataclass(frozen=True)
class InitialProfile:
    """Gaussian-envelope initial profile ``phi(x, k) = A chi(x) exp(-b |k - k0|^2)``.

    Parameters
    ----------
    amplitude : float
        ``A``.
    x_decay : float
        ``a`` in ``chi(x) = exp(-a |x|^2)``.
    k_decay : float
        ``b``.
    k0 : tuple of float
        Centre in wavenumber space; its length fixes the dimension.
    cutoff : float or None
        Optional radius of a smooth cutoff applied to the x-Fourier variable
        of ``chi`` (coordinate-wise, so ``chi`` stays separable).
    """

    amplitude: float = 1.0
    x_decay: float = float(np.pi)
    k_decay: float = 2.0
    k0: tuple[float, ...] = (0.0, 0.0, 0.0)
    cutoff: float | None = None
    _nodes: int = field(default=96, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.x_decay <= 0 or self.k_decay <= 0:
            raise ValidationError("profile decay rates must be positive")
        if len(self.k0) < 1:
            raise DimensionError("k0 must have at least one component")
        if self.cutoff is not None and self.cutoff <= 0:
            raise ValidationError("cutoff radius must be positive")
        object.__setattr__(self, "k0", tuple(float(v) for v in self.k0))

    @property
    def d(self) -> int:
        return len(self.k0)

    @property
    def isotropic(self) -> bool:
        return all(v == 0.0 for v in self.k0)

    @property
    def pure_gaussian(self) -> bool:
        return self.cutoff is None

    def support_radius(self, tol: float = 1e-12) -> float:
        """Radius beyond which ``|psi|^2`` drops below ``tol * max |psi|^2``."""
        return float(np.linalg.norm(self.k0) + np.sqrt(np.log(1.0 / tol) / (2.0 * self.k_decay)))

    # -- wavenumber part
    def g(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        if k.shape[-1] != self.d:
            raise DimensionError(f"expected wavenumbers of dimension {self.d}")
        diff = k - np.asarray(self.k0)
        return np.exp(-self.k_decay * np.sum(diff * diff, axis=-1))

    # -- spatial part
    def _cutoff_quadrature(self):
        x, w = np.polynomial.legendre.leggauss(self._nodes)
        xi = self.cutoff * x
        weights = self.cutoff * w * np.sqrt(np.pi / self.x_decay) * np.exp(-np.pi**2 * xi**2 / self.x_decay)
        return xi, weights * _bump(x)

    def h(self, x) -> np.ndarray:
        """One-dimensional spatial factor."""
        x = np.asarray(x, dtype=float)
        if self.cutoff is None:
            return np.exp(-self.x_decay * x * x)
        xi, wt = self._cutoff_quadrature()
        return np.cos(2 * np.pi * x[..., None] * xi) @ wt

    def chi(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.prod(self.h(x), axis=-1)

    def phi(self, x, k) -> np.ndarray:
        return self.amplitude * self.chi(x) * self.g(k)

    def psi(self, k) -> np.ndarray:
        """Homogeneous trace ``psi(k) = phi(0, k)``."""
        return self.amplitude * float(self.h(0.0)) ** self.d * self.g(k)

    def psi_sq(self, k) -> np.ndarray:
        return np.abs(self.psi(k)) ** 2

    def norm_sq(self, k) -> np.ndarray:
        """``||phi(., k)||^2`` in ``L^2(R^d)``."""
        if self.cutoff is None:
            one = np.sqrt(np.pi / (2 * self.x_decay))
        else:
            xi, wt = self._cutoff_quadrature()
            one = float(np.sum(wt**2 / (self.cutoff * np.polynomial.legendre.leggauss(self._nodes)[1])))
        return self.amplitude**2 * one**self.d * self.g(k) ** 2

    def ambiguity_1d(self, y, eta) -> np.ndarray:
        """``h(y - eta/2) h(y + eta/2)``: the zeta-Fourier transform of the 1-D Wigner factor."""
        y, eta = np.asarray(y, dtype=float), np.asarray(eta, dtype=float)
        return self.h(y - eta / 2) * self.h(y + eta / 2)

    def with_k0(self, k0) -> "InitialProfile":
        return InitialProfile(self.amplitude, self.x_decay, self.k_decay, tuple(k0), self.cutoff)

    def trace_at(self, x) -> "TraceProfile":
        """The wavenumber profile ``k -> phi(x, k)`` at a fixed position."""
        return TraceProfile(self, tuple(float(v) for v in np.asarray(x, dtype=float).reshape(-1)))


@dataclass(frozen=True)
class TraceProfile:
    """``k -> phi(x, k)`` at a fixed ``x``; duck-types the ``psi`` side of :class:`InitialProfile`."""

    base: InitialProfile
    x: tuple[float, ...]

    @property
    def d(self) -> int:
        return self.base.d

    @property
    def isotropic(self) -> bool:
        return self.base.isotropic

    @property
    def k_decay(self) -> float:
        return self.base.k_decay

    @property
    def k0(self) -> tuple[float, ...]:
        return self.base.k0

    def support_radius(self, tol: float = 1e-12) -> float:
        return self.base.support_radius(tol)

    def psi(self, k) -> np.ndarray:
        return self.base.amplitude * float(self.base.chi(np.asarray(self.x))) * self.base.g(k)

    def psi_sq(self, k) -> np.ndarray:
        return np.abs(self.psi(k)) ** 2


# ---------------------------------------------------------------------------
# Wigner transforms
# ---------------------------------------------------------------------------


def wigner_1d(f: Callable, x, zeta, extent: float = 8.0, nodes: int = 257) -> np.ndarray:
    """``int exp(-2 pi i y zeta) f(x + y/2) conj(f(x - y/2)) dy`` by the trapezoid rule on ``[-extent, extent]``."""
    x, zeta = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(zeta, dtype=float))
    y = np.linspace(-extent, extent, nodes)
    wy = np.full(nodes, y[1] - y[0])
    wy[[0, -1]] *= 0.5
    xs, zs = x[..., None], zeta[..., None]
    vals = f(xs + y / 2) * np.conj(f(xs - y / 2)) * np.exp(-2j * np.pi * y * zs)
    return np.real(vals @ wy)


def wigner(profile: InitialProfile, k, x, zeta) -> np.ndarray:
    """Wigner transform of ``phi(., k)`` evaluated at ``(x, zeta)`` (real-valued).

    Closed form for pure Gaussians; otherwise a product of one-dimensional
    quadratures (the spatial factor is separable).
    """
    x = np.asarray(x, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    if x.shape[-1] != profile.d or zeta.shape[-1] != profile.d:
        raise DimensionError("x and zeta must have the profile dimension")
    gk = profile.amplitude**2 * profile.g(k) ** 2
    a = profile.x_decay
    if profile.pure_gaussian:
        per = np.sqrt(2 * np.pi / a) * np.exp(-2 * a * x * x - 2 * np.pi**2 * zeta * zeta / a)
    else:
        extent = 2 * np.sqrt(40.0 / a)
        per = wigner_1d(profile.h, x, zeta, extent=extent, nodes=401)
    return gk * np.prod(per, axis=-1)


# ---------------------------------------------------------------------------
# leaf weights and finite-lattice spectra
# ---------------------------------------------------------------------------


def leaf_weight(c: Couple, dec: Decoration | np.ndarray, profile) -> np.ndarray | float:
    """``prod over pairs of |psi(pair value)|^2``."""
    vals = dec.values if isinstance(dec, Decoration) else np.asarray(dec, dtype=float)
    nodes = [a for a, _ in c.pairs]
    out = np.prod(profile.psi_sq(vals[..., nodes, :]), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def scaling_lambda(L: float, alpha: float) -> float:
    """``lambda = L^(-alpha/2)``."""
    return float(L) ** (-alpha / 2.0)


@numba.njit(cache=True)
def _finite_histogram(pts, lookup, m, weights, P, root, K, pair_nodes, br, c1s, c3s, bsg, r2, check_nodes, radix, off):
    n = pts.shape[0]
    d = pts.shape[1]
    N = P.shape[0]
    npairs = P.shape[1]
    nfree = npairs - 1
    nb = br.shape[0]
    side = 2 * m + 1
    hist = Dict.empty(key_type=types.int64, value_type=types.float64)
    idx = np.zeros(nfree, np.int64)
    pv = np.zeros((npairs, d), np.int64)
    vals = np.zeros((N, d), np.int64)
    total = 1
    for _ in range(nfree):
        total *= n
    for it in range(total):
        rem = it
        for j in range(nfree - 1, -1, -1):
            idx[j] = rem % n
            rem //= n
        w = 1.0
        for j in range(nfree):
            w *= weights[idx[j]]
            for q in range(d):
                pv[j + 1, q] = pts[idx[j], q]
        if w == 0.0:
            continue
        ss = 0
        flat = 0
        inside = True
        for q in range(d):
            s = K[q]
            for j in range(1, npairs):
                s -= root[j] * pv[j, q]
            v = root[0] * s
            pv[0, q] = v
            ss += v * v
            if v < -m or v > m:
                inside = False
            flat = flat * side + (v + m)
        if not inside or ss > r2:
            continue
        li = lookup[flat]
        if li < 0:
            continue
        w *= weights[li]
        if w == 0.0:
            continue
        ok = True
        for a in range(N):
            nn = 0
            for q in range(d):
                s = 0
                for j in range(npairs):
                    s += P[a, j] * pv[j, q]
                vals[a, q] = s
                nn += s * s
            if check_nodes and nn > r2:
                ok = False
        if not ok:
            continue
        key = 0
        for bi in range(nb):
            b = br[bi]
            acc = 0
            for q in range(d):
                acc += (vals[b, q] - vals[c1s[bi], q]) * (vals[b, q] - vals[c3s[bi], q])
            key = key * radix + (bsg[bi] * acc + off)
        hist[key] = hist.get(key, 0.0) + w
    keys = np.empty(len(hist), np.int64)
    vals_out = np.empty(len(hist), np.float64)
    i = 0
    for kk, vv in hist.items():
        keys[i] = kk
        vals_out[i] = vv
        i += 1
    return keys, vals_out


def resonance_histogram(c: Couple, k, spec: LatticeSpec, profile, bound: str = "pairs", max_decorations: float = 1e6):
    """Leaf weights of all lattice decorations, summed per integer resonance vector.

    Returns ``(I, H)`` with ``I`` of shape ``(U, n_branching)`` holding the
    distinct values of ``L^2 Omega_b`` and ``H`` the summed weights.
    """
    if bound not in ("pairs", "nodes"):
        raise ValidationError(f"unknown bound {bound!r}")
    K = to_lattice_int(k, spec.L)
    P = pair_coefficients(c, "D")
    npairs = P.shape[1]
    nb = len(c.branching)
    r2 = spec.int_radius_sq + 1e-9
    pts = spec.ball_points()
    weights = profile.psi_sq(pts / spec.L).astype(float)
    if npairs == 1:
        if float(K @ K) > r2:
            return np.zeros((0, 0), np.int64), np.zeros(0)
        return np.zeros((1, 0), np.int64), np.array([float(profile.psi_sq(K / spec.L))])
    cand = float(len(pts)) ** (npairs - 1)
    if cand > max_decorations:
        raise CapacityError(f"{cand:.3g} candidate decorations exceed the capacity {max_decorations:.3g}")
    m = int(np.floor(spec.radius * spec.L + 1e-12))
    side = 2 * m + 1
    lookup = -np.ones(side**spec.d, dtype=np.int64)
    flat = np.zeros(len(pts), dtype=np.int64)
    for q in range(spec.d):
        flat = flat * side + (pts[:, q] + m)
    lookup[flat] = np.arange(len(pts))
    rint = np.sqrt(r2)
    off = int(np.ceil(16 * npairs**2 * rint * rint)) + 1
    radix = 2 * off + 1
    if nb * np.log2(radix) > 62:
        raise CapacityError("resonance keys do not fit in 64 bits")
    br = np.array(c.branching, dtype=np.int64)
    c1s = np.array([c.children[b][0] for b in c.branching], dtype=np.int64)
    c3s = np.array([c.children[b][2] for b in c.branching], dtype=np.int64)
    bsg = np.array([c.signs[b] for b in c.branching], dtype=np.int64)
    pair_nodes = np.array([a for a, _ in c.pairs], dtype=np.int64)
    keys, H = _finite_histogram(
        pts, lookup, m, weights, P.astype(np.int64), P[0].astype(np.int64), K.astype(np.int64),
        pair_nodes, br, c1s, c3s, bsg, r2, bound == "nodes", radix, off,
    )
    order = np.argsort(keys)
    keys, H = keys[order], H[order]
    digits = np.empty((len(keys), nb), dtype=np.int64)
    rem = keys.copy()
    for j in range(nb - 1, -1, -1):
        digits[:, j] = rem % radix - off
        rem //= radix
    return digits, H


def finite_L_spectrum(
    c: Couple,
    t: float,
    k,
    L: float,
    alpha: float,
    profile,
    radius: float | None = None,
    bound: str = "pairs",
    max_decorations: float = 1e6,
) -> complex:
    """Finite-lattice spectrum of one couple at time ``t`` (Dyson time) and wavenumber ``k``.

    ``polarity * (lambda / L^d)^(2n) * sum over decorations of
    Theta_t(Omega) * prod |psi(pair values)|^2`` with ``lambda^2 = L^-alpha``.
    Pair values are restricted to the closed ball of ``radius`` (default:
    the profile's support radius); ``bound="nodes"`` restricts every node.
    """
    if not 0 < alpha < 2:
        raise ValidationError("alpha must lie in (0, 2)")
    if c.order > 2:
        raise CapacityError("finite-lattice spectra are limited to order <= 2")
    R = profile.support_radius() if radius is None else float(radius)
    spec = LatticeSpec(L, profile.d, R)
    I, H = resonance_histogram(c, k, spec, profile, bound, max_decorations)
    if len(H) == 0:
        return 0j
    n = c.order
    if n == 0:
        return complex(H[0])
    G = OrderedForest.from_tree(c)
    total = 0j
    for row, h in zip(I, H):
        total += complex(theta(G, row / (L * L))(t)) * h
    lam = scaling_lambda(L, alpha)
    return complex(c.polarity * (lam / L**profile.d) ** (2 * n) * total)


def finite_L_spectrum_direct(
    c: Couple, t: float, k, L: float, alpha: float, profile, radius: float, bound: str = "pairs"
) -> complex:
    """Reference implementation: one time kernel per decoration, no grouping."""
    from .decorations import integer_resonance, lattice_decoration_arrays

    spec = LatticeSpec(L, profile.d, radius)
    G = OrderedForest.from_tree(c)
    total = 0j
    for vals in lattice_decoration_arrays(c, k, spec, bound=bound):
        om = integer_resonance(c, vals) / (L * L)
        w = leaf_weight(c, vals / L, profile)
        for row, wt in zip(om, np.atleast_1d(w)):
            total += complex(theta(G, row)(t)) * wt
    lam = scaling_lambda(L, alpha)
    return complex(c.polarity * (lam / L**profile.d) ** (2 * c.order) * total)


# ---------------------------------------------------------------------------
# resonant-manifold quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResonantQuadrature:
    """Product rule for ``int delta(a . b) F da db`` and its Monte Carlo fallback.

    ``radial``/``plane_radial`` Gauss-Legendre nodes on ``[0, rcut]`` for
    ``|a|`` and ``|b|``; ``polar`` Gauss-Legendre nodes in ``cos(theta)``;
    ``azimuth``/``plane_angle`` trapezoid nodes on the circle.  ``rcut=None``
    lets the caller choose the radius from the data.
    """

    radial: int = 16
    polar: int = 8
    azimuth: int = 12
    plane_radial: int = 16
    plane_angle: int = 12
    rcut: float | None = None
    time_order: int = 16
    mc_samples: int = 100_000
    seed: int = 0
    method: Literal["product", "mc", "auto"] = "auto"
    max_nodes: int = 5_000_000

    def __post_init__(self) -> None:
        for name in ("radial", "polar", "azimuth", "plane_radial", "plane_angle", "time_order", "mc_samples"):
            if getattr(self, name) < 1:
                raise ValidationError(f"quadrature field {name} must be positive")
        if self.method not in ("product", "mc", "auto"):
            raise ValidationError(f"unknown quadrature method {self.method!r}")

    def size(self, d: int) -> int:
        if d == 3:
            return self.radial * self.polar * self.azimuth * self.plane_radial * self.plane_angle
        if d == 2:
            return self.radial * self.azimuth * self.plane_radial
        raise DimensionError("resonant quadrature supports d in {2, 3}")

    def nodes(self, d: int, rcut: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(a, b, w)`` with ``int delta(a.b) F = sum w F(a, b)`` (for ``|a|, |b| <= rcut``)."""
        if self.size(d) > self.max_nodes:
            raise BudgetError(f"{self.size(d)} quadrature nodes exceed the budget {self.max_nodes}")
        return _product_nodes(d, float(rcut), self.radial, self.polar, self.azimuth, self.plane_radial, self.plane_angle)


def _gl01(n: int, hi: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * hi * (x + 1), 0.5 * hi * w


def orthonormal_complement(a: np.ndarray) -> np.ndarray:
    """Orthonormal basis of ``a^perp`` for each row, shape ``(..., d-1, d)`` (d in {2, 3})."""
    a = np.asarray(a, dtype=float)
    d = a.shape[-1]
    nrm = np.linalg.norm(a, axis=-1, keepdims=True)
    u = np.divide(a, nrm, out=np.zeros_like(a), where=nrm > 0)
    u[..., 0] = np.where(nrm[..., 0] > 0, u[..., 0], 1.0)
    if d == 2:
        return np.stack([-u[..., 1], u[..., 0]], axis=-1)[..., None, :]
    if d != 3:
        raise DimensionError("orthonormal_complement supports d in {2, 3}")
    helper = np.zeros_like(u)
    use_y = np.abs(u[..., 0]) > 0.9
    helper[..., 0] = np.where(use_y, 0.0, 1.0)
    helper[..., 1] = np.where(use_y, 1.0, 0.0)
    e1 = helper - np.sum(helper * u, axis=-1, keepdims=True) * u
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(u, e1)
    return np.stack([e1, e2], axis=-2)


@lru_cache(maxsize=16)
def _product_nodes(d, rcut, nr, npol, naz, nrho, nchi):
    r, wr = _gl01(nr, rcut)
    if d == 2:
        th = 2 * np.pi * np.arange(naz) / naz
        wth = np.full(naz, 2 * np.pi / naz)
        x, wx = np.polynomial.legendre.leggauss(nrho)
        rho, wrho = rcut * x, rcut * wx
        om = np.stack([np.cos(th), np.sin(th)], axis=-1)
        perp = np.stack([-np.sin(th), np.cos(th)], axis=-1)
        a = r[:, None, None, None] * om[None, :, None, :]
        b = rho[None, None, :, None] * perp[None, :, None, :]
        a, b = np.broadcast_arrays(a, b)
        w = wr[:, None, None] * wth[None, :, None] * wrho[None, None, :]
        return a.reshape(-1, 2).copy(), b.reshape(-1, 2).copy(), w.reshape(-1)
    ct, wct = np.polynomial.legendre.leggauss(npol)
    ph = 2 * np.pi * np.arange(naz) / naz
    wph = np.full(naz, 2 * np.pi / naz)
    st = np.sqrt(1 - ct**2)
    om = np.stack(
        [st[:, None] * np.cos(ph)[None, :], st[:, None] * np.sin(ph)[None, :], np.repeat(ct[:, None], naz, axis=1)],
        axis=-1,
    ).reshape(-1, 3)
    wom = (wct[:, None] * wph[None, :]).reshape(-1)
    basis = orthonormal_complement(om)  # (nom, 2, 3)
    rho, wrho = _gl01(nrho, rcut)
    chi = 2 * np.pi * np.arange(nchi) / nchi
    wchi = np.full(nchi, 2 * np.pi / nchi)
    dirs = np.cos(chi)[None, :, None] * basis[:, None, 0, :] + np.sin(chi)[None, :, None] * basis[:, None, 1, :]
    # a: (nr, nom), b: (nom, nrho, nchi)
    a = r[:, None, None, None, None] * om[None, :, None, None, :]
    b = rho[None, None, :, None, None] * dirs[None, :, None, :, :]
    a, b = np.broadcast_arrays(a, b)
    w = (
        (wr * r)[:, None, None, None]
        * wom[None, :, None, None]
        * (wrho * rho)[None, None, :, None]
        * wchi[None, None, None, :]
    )
    return a.reshape(-1, 3).copy(), b.reshape(-1, 3).copy(), w.reshape(-1)


def default_rcut(k, profile) -> float:
    """Radius covering ``k1 - k`` and ``k3 - k`` for pair values in the profile's support."""
    return float(np.linalg.norm(np.asarray(k, dtype=float)) + profile.support_radius(1e-14))


def _integrand_points(k, a, b):
    k = np.asarray(k, dtype=float)
    k1 = k + a
    k3 = k + b
    return k1, k1 + b, k3


def resonant_integral_mc(F: Callable, k, nsamples: int = 100_000, seed: int = 0, scale: float = 1.0) -> tuple[float, float]:
    """Importance-sampled ``int delta(Omega) F``; returns ``(estimate, standard error)``.

    ``a ~ N(0, scale^2 I_d)`` and ``b`` Gaussian of the same scale on ``a^perp``.
    """
    k = np.asarray(k, dtype=float)
    d = k.shape[-1]
    if d not in (2, 3):
        raise DimensionError("resonant integrals support d in {2, 3}")
    rng = np.random.default_rng(seed)
    a = rng.normal(scale=scale, size=(nsamples, d))
    coef = rng.normal(scale=scale, size=(nsamples, d - 1))
    basis = orthonormal_complement(a)
    b = np.einsum("sj,sjd->sd", coef, basis)
    ra2 = np.sum(a * a, axis=1)
    rb2 = np.sum(coef * coef, axis=1)
    s2 = scale * scale
    pa = (2 * np.pi * s2) ** (-d / 2) * np.exp(-ra2 / (2 * s2))
    pb = (2 * np.pi * s2) ** (-(d - 1) / 2) * np.exp(-rb2 / (2 * s2))
    vals = np.real(F(*_integrand_points(k, a, b))) / (np.sqrt(ra2) * pa * pb)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(nsamples))


def resonant_integral(F: Callable, k, quadrature: ResonantQuadrature | None = None, rcut: float | None = None) -> float:
    """``int_{k1 - k2 + k3 = k} delta(Omega) F(k1, k2, k3)`` for ``d`` in {2, 3}.

    ``F`` receives arrays ``k1, k2, k3`` of shape ``(..., d)``.  The product
    rule is used unless it exceeds the node budget (``method="auto"``) or
    Monte Carlo is requested.
    """
    q = quadrature or ResonantQuadrature()
    k = np.asarray(k, dtype=float)
    d = k.shape[-1]
    if d not in (2, 3):
        raise DimensionError("resonant integrals support d in {2, 3}")
    R = rcut if rcut is not None else q.rcut
    if R is None:
        raise ValidationError("resonant_integral needs a cutoff radius")
    use_mc = q.method == "mc" or (q.method == "auto" and q.size(d) > q.max_nodes)
    if use_mc:
        return resonant_integral_mc(F, k, q.mc_samples, q.seed, scale=R / 3)[0]
    a, b, w = q.nodes(d, R)
    total = 0.0
    step = 250_000
    for s in range(0, len(w), step):
        sl = slice(s, s + step)
        total += float(np.real(F(*_integrand_points(k, a[sl], b[sl]))) @ w[sl])
    return total


# ---------------------------------------------------------------------------
# kinetic-limit spectra (homogeneous)
# ---------------------------------------------------------------------------


@lru_cache(maxsize=4096)
def _plan(c: Couple):
    """Nested ``(sigma, (plan1, plan2, plan3))`` of a regular couple (None when trivial)."""
    if c.order == 0:
        return None
    dec = regular_decomposition(c)
    if dec is None:
        raise NonRegularError("couple is not regular")
    return (dec[0], tuple(_plan(q) for q in dec[1:]))


def _plan_order(plan) -> int:
    return 0 if plan is None else 1 + sum(_plan_order(p) for p in plan[1])


class _SpatialEvaluator:
    """Iterated resonant integrals ``S(q, k)`` with per-sub-couple memo tables.

    Sub-couples of positive order are tabulated on a radial grid when the
    profile is isotropic (their values are then radial); otherwise they are
    evaluated by nested quadrature under a node budget.
    """

    def __init__(self, profile, quadrature: ResonantQuadrature, rcut: float, budget: float = 2e9):
        self.profile = profile
        self.q = quadrature
        self.rcut = rcut
        self.nodes = quadrature.nodes(profile.d, rcut)
        self.budget = budget
        self.tables: dict = {}

    def leaf(self, pts: np.ndarray) -> np.ndarray:
        return self.profile.psi_sq(pts)

    def value(self, plan, K: np.ndarray) -> np.ndarray:
        K = np.asarray(K, dtype=float)
        if plan is None:
            return self.leaf(K)
        flat = K.reshape(-1, K.shape[-1])
        a, b, w = self.nodes
        kids = [self.evaluator(p) for p in plan[1]]
        per = max(1, int(2_000_000 // len(w)))
        out = np.empty(len(flat))
        for s in range(0, len(flat), per):
            blk = flat[s : s + per, None, :]
            k1, k2, k3 = blk + a, blk + a + b, blk + b
            prod = kids[0](k1) * kids[1](k2) * kids[2](k3)
            out[s : s + per] = prod @ w
        return out.reshape(K.shape[:-1])

    def evaluator(self, plan) -> Callable[[np.ndarray], np.ndarray]:
        if plan is None:
            return self.leaf
        if plan in self.tables:
            return self.tables[plan]
        if self.profile.isotropic:
            rmax = self.profile.support_radius(1e-14) * (2 * _plan_order(plan) + 1)
            radii = np.linspace(0.0, rmax, 161)
            pts = np.zeros((len(radii), self.profile.d))
            pts[:, 0] = radii
            spline = CubicSpline(radii, self.value(plan, pts), bc_type=((1, 0.0), "not-a-knot"))

            def fn(x, spline=spline, rmax=rmax):
                r = np.linalg.norm(x, axis=-1)
                return np.where(r <= rmax, spline(np.minimum(r, rmax)), 0.0)

        else:
            cost = float(len(self.nodes[2])) ** (_plan_order(plan) + 1)
            if cost > self.budget:
                raise BudgetError("nested kinetic-limit quadrature exceeds the budget; use an isotropic profile")

            def fn(x, plan=plan):
                return self.value(plan, x)

        self.tables[plan] = fn
        return fn


def _time_volume(plan, t: float, order: int) -> float:
    """Simplex volume by nested Gauss-Legendre time integrals (exact for these polynomials)."""
    x, w = np.polynomial.legendre.leggauss(max(order, 1))
    memo: dict = {}

    def T(p, s: float) -> float:
        if p is None:
            return 1.0
        key = (id(p), s)
        if key not in memo:
            nodes, weights = 0.5 * s * (x + 1), 0.5 * s * w
            memo[key] = float(sum(wt * np.prod([T(ch, u) for ch in p[1]]) for u, wt in zip(nodes, weights)))
        return memo[key]

    return T(plan, float(t))


def kinetic_limit_spectrum(
    c: Couple,
    t: float,
    k,
    profile,
    quadrature: ResonantQuadrature | None = None,
    method: Literal["closed", "recursive"] = "closed",
) -> np.ndarray | float:
    """Kinetic-limit spectrum of a regular couple at ``(t, k)``; ``k`` may be an array of points.

    The time factor is the simplex volume of the factor-tree order:
    ``t^n e / n!`` from linear extensions (``method="closed"``) or nested
    time integrals (``"recursive"``).  The space factor is the iterated
    resonant integral over the factor tree.
    """
    q = quadrature or ResonantQuadrature()
    plan = _plan(c)
    if c.order == 0:
        out = profile.psi_sq(np.asarray(k, dtype=float))
        return float(out) if np.ndim(out) == 0 else out
    ft = factor_tree(c)
    if method == "closed":
        tf = simplex_volume(OrderedForest.from_factor_tree(ft), t)
    elif method == "recursive":
        tf = _time_volume(plan, t, q.time_order)
    else:
        raise ValidationError(f"unknown method {method!r}")
    K = np.asarray(k, dtype=float)
    if q.rcut is not None:
        rcut = q.rcut
    else:
        R = profile.support_radius(1e-14)
        kmax = float(np.max(np.linalg.norm(K.reshape(-1, profile.d), axis=1)))
        rcut = max(kmax, (2 * c.order - 1) * R) + R
    ev = _SpatialEvaluator(profile, q, rcut)
    out = tf * ev.value(plan, K)
    return float(out) if np.ndim(out) == 0 else out


def order_one_kinetic(t: float, k, profile, quadrature: ResonantQuadrature | None = None) -> np.ndarray | float:
    """``t * int delta(Omega) |psi(k1)|^2 |psi(k2)|^2 |psi(k3)|^2`` (either order-one regular couple)."""
    from .combinatorics import enumerate_regular_couples

    return kinetic_limit_spectrum(enumerate_regular_couples(1)[0], t, k, profile, quadrature)


# ---------------------------------------------------------------------------
# kinetic-limit spectra (inhomogeneous, second microlocal)
# ---------------------------------------------------------------------------


def _eta_rule(profile: InitialProfile, nodes: int = 64):
    H = np.sqrt(2 * 40.0 / (3 * profile.x_decay))
    x, w = np.polynomial.legendre.leggauss(nodes)
    return H * x, H * w


def kinetic_limit_spectrum_inhom(
    c: Couple,
    t: float,
    k,
    x,
    zeta,
    profile: InitialProfile,
    regime: Regime = "semi-homogeneous",
    quadrature: ResonantQuadrature | None = None,
    eta_nodes: int = 64,
) -> float:
    """Second-microlocal kinetic-limit spectrum ``E^q_{t,k}(x, zeta)`` of a regular couple.

    Evaluated in the Fourier variable ``eta`` dual to ``zeta``, where the
    zeta-convolution of three factors becomes the pointwise product
    ``E1(eta) conj(E2(eta)) E3(eta)``.  Positions are shifted by
    ``s (k - k_j)`` in the inhomogeneous regime.  Orders above one are
    rejected by the node budget.
    """
    if regime not in REGIMES:
        raise ValidationError(f"unknown regime {regime!r}")
    k = np.asarray(k, dtype=float)
    x = np.asarray(x, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    _plan(c)
    if c.order == 0:
        return float(wigner(profile, k, x, zeta))
    if c.order > 1:
        raise BudgetError("inhomogeneous kinetic-limit spectra are evaluated for order <= 1")
    q = quadrature or ResonantQuadrature()
    rcut = q.rcut if q.rcut is not None else default_rcut(k, profile)
    a, b, w = q.nodes(profile.d, rcut)
    st, sw = np.polynomial.legendre.leggauss(q.time_order)
    s_nodes, s_w = 0.5 * t * (st + 1), 0.5 * t * sw
    eta, weta = _eta_rule(profile, eta_nodes)
    k1, k2, k3 = _integrand_points(k, a, b)
    gk = profile.amplitude**6 * (profile.g(k1) * profile.g(k2) * profile.g(k3)) ** 2
    keep = gk > 1e-300
    a, b, w, gk = a[keep], b[keep], w[keep], gk[keep]
    shift = regime == "inhomogeneous"
    phase = np.cos(2 * np.pi * zeta[:, None] * eta[None, :])  # factors are even in eta
    al = profile.x_decay

    def coordinate_factor(ys, i):
        # eta-integral of prod_j h(y_j - eta/2) h(y_j + eta/2) against the zeta phase
        if profile.pure_gaussian:
            sq = sum(y * y for y in ys)
            return np.exp(-2 * al * sq) * np.sqrt(2 * np.pi / (3 * al)) * np.exp(-2 * np.pi**2 * zeta[i] ** 2 / (3 * al))
        f = 1.0
        for y in ys:
            f = f * profile.ambiguity_1d(np.asarray(y)[..., None], eta)
        return f @ (weta * phase[i])

    if not shift:
        z = np.prod([coordinate_factor([x[i]] * 3, i) for i in range(profile.d)])
        return float(t * np.sum(w * gk) * z)
    total = 0.0
    for s, ws in zip(s_nodes, s_w):
        offs = (-a, -(a + b), -b)
        prod = np.ones(len(w))
        for i in range(profile.d):
            prod = prod * coordinate_factor([x[i] + s * o[:, i] for o in offs], i)
        total += ws * float(np.sum(w * gk * prod))
    return float(total)


def marginal_inhom(c: Couple, t: float, k, x, profile: InitialProfile, regime: Regime = "semi-homogeneous",
                   quadrature: ResonantQuadrature | None = None) -> float:
    """``int E^q_{t,k}(x, zeta) d zeta`` evaluated directly at ``eta = 0``."""
    if c.order == 0:
        return float(np.abs(profile.phi(x, k)) ** 2)
    if c.order > 1:
        raise BudgetError("inhomogeneous kinetic-limit spectra are evaluated for order <= 1")
    q = quadrature or ResonantQuadrature()
    k = np.asarray(k, dtype=float)
    x = np.asarray(x, dtype=float)
    rcut = q.rcut if q.rcut is not None else default_rcut(k, profile)
    a, b, w = q.nodes(profile.d, rcut)
    st, sw = np.polynomial.legendre.leggauss(q.time_order)
    k1, k2, k3 = _integrand_points(k, a, b)
    total = 0.0
    for s, ws in zip(0.5 * t * (st + 1), 0.5 * t * sw):
        if regime == "inhomogeneous":
            ys = [x + s * (k - kj) for kj in (k1, k2, k3)]
        else:
            ys = [x, x, x]
        vals = np.ones(len(w))
        for y, kj in zip(ys, (k1, k2, k3)):
            vals = vals * np.abs(profile.phi(y, kj)) ** 2
        total += ws * float(vals @ w)
    return total


def spectrum_rows(couple_id: str, L, t, k, value, reference) -> dict:
    """One CSV row of a spectrum sweep."""
    k = np.asarray(k, dtype=float).reshape(-1)
    row = {"couple": couple_id, "L": L, "t": t}
    row.update({f"k{i}": float(v) for i, v in enumerate(k)})
    row.update({"value": float(np.real(value)), "reference": float(np.real(reference)),
                "error": float(abs(np.real(value) - np.real(reference)))})
    return row


__all__ = [
    "InitialProfile",
    "TraceProfile",
    "ResonantQuadrature",
    "REGIMES",
    "leaf_weight",
    "finite_L_spectrum",
    "finite_L_spectrum_direct",
    "resonance_histogram",
    "resonant_integral",
    "resonant_integral_mc",
    "kinetic_limit_spectrum",
    "kinetic_limit_spectrum_inhom",
    "marginal_inhom",
    "order_one_kinetic",
    "orthonormal_complement",
    "scaling_lambda",
    "wigner",
    "wigner_1d",
    "spectrum_rows",
    "default_rcut",
]
