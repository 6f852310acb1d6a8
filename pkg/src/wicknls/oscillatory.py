"""Gauss sums and the oscillatory lattice-sum / integral functionals.

For test functions ``Phi(s, z)`` on ``R^n x (R^{2d})^n`` the functionals are

    S_L(Phi)   = L^{-2nd} sum_{z in lattice} int exp(2 pi i s . w(z)) Phi(s, z) ds
    S_inf(Phi) = int int exp(2 pi i s . w(z)) Phi(s, z) ds dz

with ``w_j(z) = x_j . y_j``.  Only separable test functions are supported:
a product over slots of a temporal profile and a spatial block, the spatial
block itself a product over the ``2d`` coordinates.  The functional then
factorizes over slots and, inside a slot, the lattice sum over ``z``
factorizes over coordinates once the ``s`` integral is taken last.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal, Sequence

import numpy as np
from scipy import integrate

from .errors import BudgetError, UnsupportedError, ValidationError

INFINITY = float("inf")
_GAUSS_CUT = 7.0  # exp(-pi * 49) is far below double precision


# ---------------------------------------------------------------------------
# Gauss sums
# ---------------------------------------------------------------------------


def gauss_sum(s, r, h: int, N: int):
    """``sum_{n=h}^{h+N} exp(pi i (s n^2 + r n))``, vectorized over ``s`` and ``r``."""
    if N < 0:
        raise ValidationError("N must be non-negative")
    s = np.asarray(s, dtype=float)
    r = np.asarray(r, dtype=float)
    n = np.arange(h, h + N + 1, dtype=float)
    shape = np.broadcast_shapes(s.shape, r.shape)
    sb = np.broadcast_to(s, shape)[..., None]
    rb = np.broadcast_to(r, shape)[..., None]
    out = np.exp(1j * np.pi * (sb * n * n + rb * n)).sum(axis=-1)
    return out if out.shape else complex(out)


def gauss_sum_moment(p: int, N: int, r: float = 0.0, h: int = 0, s_grid: int | None = None, chunk: int = 4096) -> float:
    """Period average ``(1/2) int_0^2 |G_h(s, r, N)|^p ds`` by the trapezoid rule.

    ``|G|^p`` is a trigonometric polynomial in ``s`` of period 2, so the
    default grid of ``p (|h| + N)^2 + 1`` points makes the rule exact up to
    rounding.
    """
    if p not in (4, 6):
        raise ValidationError("moment order must be 4 or 6")
    M = s_grid if s_grid is not None else p * (abs(h) + N) ** 2 + 1
    s = 2.0 * np.arange(M) / M
    acc = 0.0
    for start in range(0, M, chunk):
        g = gauss_sum(s[start : start + chunk], r, h, N)
        acc += float(np.sum(np.abs(g) ** p))
    return acc / M


def gauss_moment_ratios(Ns: Sequence[int] = (8, 16, 32, 64, 128, 256)) -> list[dict]:
    """Rows ``(N, m4, m4 / (N^2 log(1+N)), m6, m6 / N^4)``."""
    rows = []
    for N in Ns:
        M = 6 * N * N + 1
        s = 2.0 * np.arange(M) / M
        a4 = a6 = 0.0
        for start in range(0, M, 4096):
            g2 = np.abs(gauss_sum(s[start : start + 4096], 0.0, 0, N)) ** 2
            a4 += float(np.sum(g2**2))
            a6 += float(np.sum(g2**3))
        m4, m6 = a4 / M, a6 / M
        rows.append({"N": N, "m4": m4, "r4": m4 / (N * N * np.log1p(N)), "m6": m6, "r6": m6 / N**4})
    return rows


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------


def bump(u):
    """Smooth compactly supported ``exp(-1 / (1 - u^2))`` on ``|u| < 1``."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


@dataclass(frozen=True)
class TemporalProfile:
    """``amplitude * f((s - center) / width)`` with ``f`` Gaussian ``exp(-pi u^2)``, a bump, or constant."""

    kind: Literal["gaussian", "bump", "constant"] = "gaussian"
    center: float = 0.0
    width: float = 1.0
    amplitude: complex = 1.0

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "constant":
            return self.amplitude * np.ones_like(s)
        u = (s - self.center) / self.width
        if self.kind == "gaussian":
            return self.amplitude * np.exp(-np.pi * u * u)
        if self.kind == "bump":
            return self.amplitude * bump(u)
        raise UnsupportedError(f"temporal profile {self.kind!r}")

    def fourier(self, omega):
        """``int f(s) exp(2 pi i s omega) ds`` (closed form, Gaussian only)."""
        if self.kind != "gaussian":
            raise UnsupportedError(f"no closed-form transform for a {self.kind} profile")
        w = np.asarray(omega, dtype=float)
        return self.amplitude * self.width * np.exp(-np.pi * (self.width * w) ** 2 + 2j * np.pi * self.center * w)

    def support(self) -> tuple[float, float]:
        if self.kind == "gaussian":
            return self.center - _GAUSS_CUT * self.width, self.center + _GAUSS_CUT * self.width
        if self.kind == "bump":
            return self.center - self.width, self.center + self.width
        return -np.inf, np.inf


@dataclass(frozen=True)
class SpatialBlock:
    """Product over the ``2d`` coordinates of ``f((z_i - c_i) / width)``; ``f`` Gaussian or bump.

    ``center`` lists the ``x`` centers followed by the ``y`` centers.
    """

    kind: Literal["gaussian", "bump"] = "gaussian"
    center: tuple[float, ...] | None = None
    width: float = 1.0

    def centers(self, d: int) -> tuple[np.ndarray, np.ndarray]:
        if self.center is None:
            return np.zeros(d), np.zeros(d)
        c = np.asarray(self.center, dtype=float)
        if c.shape != (2 * d,):
            raise ValidationError("spatial center needs 2d entries")
        return c[:d], c[d:]

    def profile(self, u):
        if self.kind == "gaussian":
            return np.exp(-np.pi * np.asarray(u) ** 2)
        if self.kind == "bump":
            return bump(u)
        raise UnsupportedError(f"spatial profile {self.kind!r}")

    def half_extent(self) -> float:
        return (_GAUSS_CUT if self.kind == "gaussian" else 1.0) * self.width


@dataclass(frozen=True)
class SeparableTestFunction:
    """``Phi(s, z) = prod_j T_j(s_j) rho_j(z_j)`` on ``n`` slots in dimension ``d``."""

    temporal: tuple[TemporalProfile, ...]
    spatial: tuple[SpatialBlock, ...]
    d: int = 3

    def __post_init__(self) -> None:
        if len(self.temporal) != len(self.spatial):
            raise ValidationError("one temporal profile per spatial block")

    @property
    def n(self) -> int:
        return len(self.temporal)

    @staticmethod
    def gaussian(n: int = 1, d: int = 3) -> "SeparableTestFunction":
        return SeparableTestFunction((TemporalProfile(),) * n, (SpatialBlock(),) * n, d)


def scale_theta(phi: SeparableTestFunction, L: float, alpha: float) -> SeparableTestFunction:
    """Dilate every temporal profile by ``gamma = L^alpha``; ``L = inf`` takes the trace at ``s = 0``."""
    if L == INFINITY:
        temporal = tuple(TemporalProfile("constant", amplitude=complex(np.asarray(t(0.0)))) for t in phi.temporal)
        return replace(phi, temporal=temporal)
    if L < 1:
        raise ValidationError("scale_theta needs L >= 1")
    if not 0 < alpha < 2:
        raise ValidationError("alpha must lie in (0, 2)")
    gamma = L**alpha
    temporal = tuple(
        t if t.kind == "constant" else replace(t, center=t.center * gamma, width=t.width * gamma) for t in phi.temporal
    )
    return replace(phi, temporal=temporal)


# ---------------------------------------------------------------------------
# per-coordinate factors
# ---------------------------------------------------------------------------


def _continuum_factor(s, a: float, b: float, w: float, kind: str):
    """``int int exp(2 pi i s x y) f((x-a)/w) f((y-b)/w) dx dy`` (Gaussian closed form)."""
    if kind != "gaussian":
        raise UnsupportedError("the continuum functional supports Gaussian spatial blocks only")
    s = np.asarray(s, dtype=float)
    c = 1.0 / w**2 + w**2 * s * s
    z = a / w**2 + 1j * s * b
    return w * np.exp(np.pi * z * z / c - np.pi * a * a / w**2) / np.sqrt(c)


def _lattice_points(L: float, center: float, half: float) -> np.ndarray:
    lo = int(np.ceil((center - half) * L))
    hi = int(np.floor((center + half) * L))
    return np.arange(lo, hi + 1) / L


def _lattice_factor(s, L: float, a: float, b: float, w: float, kind: str, method: str = "auto"):
    """``L^-2 sum_{x, y in Z/L} exp(2 pi i s x y) f((x-a)/w) f((y-b)/w)``.

    The Gaussian case sums over ``y`` by Poisson summation, leaving a single
    lattice sum over ``x``; the bump case sums both variables directly.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    half = (_GAUSS_CUT if kind == "gaussian" else 1.0) * w
    x = _lattice_points(L, a, half)
    fx = np.exp(-np.pi * ((x - a) / w) ** 2) if kind == "gaussian" else bump((x - a) / w)
    if method == "auto":
        method = "poisson" if kind == "gaussian" else "direct"
    out = np.zeros(s.shape, dtype=complex)
    block = max(1, 2_000_000 // max(1, len(x)))
    if method == "poisson":
        if kind != "gaussian":
            raise UnsupportedError("Poisson summation needs a Gaussian block")
        nj = int(np.ceil(_GAUSS_CUT / (w * L))) + 1
        offs = np.arange(-nj, nj + 1)
        for start in range(0, len(s), block):
            sx = s[start : start + block, None] * x[None, :]
            j0 = np.rint(sx / L)
            acc = np.zeros(sx.shape, dtype=complex)
            for o in offs:
                u = sx - (j0 + o) * L
                acc += np.exp(-np.pi * (w * u) ** 2 + 2j * np.pi * b * u)
            out[start : start + block] = (w / L) * (acc * fx[None, :]).sum(axis=1)
        return out
    if method == "direct":
        y = _lattice_points(L, b, half)
        fy = np.exp(-np.pi * ((y - b) / w) ** 2) if kind == "gaussian" else bump((y - b) / w)
        xy = np.outer(x, y)
        wgt = np.outer(fx, fy)
        blk = max(1, 2_000_000 // max(1, xy.size))
        for start in range(0, len(s), blk):
            ph = np.exp(2j * np.pi * s[start : start + blk, None, None] * xy[None])
            out[start : start + blk] = (ph * wgt[None]).sum(axis=(1, 2)) / (L * L)
        return out
    raise ValidationError(f"unknown method {method!r}")


def _slot_factor(s, block: SpatialBlock, d: int, L: float, method: str = "auto"):
    """Spatial lattice sum (or integral) of one slot at temporal frequencies ``s``."""
    ax, by = block.centers(d)
    out = np.ones(np.shape(s), dtype=complex)
    cache: dict[tuple[float, float], np.ndarray] = {}
    for i in range(d):
        key = (float(ax[i]), float(by[i]))
        if key not in cache:
            if L == INFINITY:
                cache[key] = _continuum_factor(s, key[0], key[1], block.width, block.kind)
            else:
                cache[key] = _lattice_factor(s, L, key[0], key[1], block.width, block.kind, method)
        out = out * cache[key]
    return out


# ---------------------------------------------------------------------------
# functionals
# ---------------------------------------------------------------------------


def _composite_gl(f, lo: float, hi: float, panel: float, order: int = 12) -> complex:
    npan = max(1, int(np.ceil((hi - lo) / panel)))
    edges = np.linspace(lo, hi, npan + 1)
    xg, wg = np.polynomial.legendre.leggauss(order)
    mids = 0.5 * (edges[1:] + edges[:-1])
    halfw = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mids[:, None] + halfw[:, None] * xg[None, :]).ravel()
    weights = (halfw[:, None] * wg[None, :]).ravel()
    return complex(np.sum(weights * f(nodes)))


def _slot_value(T: TemporalProfile, block: SpatialBlock, d: int, L: float, method: str, panel: float | None) -> complex:
    if L == INFINITY:
        if block.kind != "gaussian":
            raise UnsupportedError("the continuum functional supports Gaussian spatial blocks only")
        lo, hi = T.support()

        def part(fun):
            val, _ = integrate.quad(fun, lo, hi, epsabs=1e-11, epsrel=1e-10, limit=500)
            return val

        if T.kind == "constant":
            g = lambda s: _slot_factor(np.array([s]), block, d, L)[0]  # noqa: E731
            amp = complex(T.amplitude)
        else:
            g = lambda s: (T(np.array([s])) * _slot_factor(np.array([s]), block, d, L))[0]  # noqa: E731
            amp = 1.0
        re = part(lambda s: float(np.real(g(s))))
        im = part(lambda s: float(np.imag(g(s))))
        return amp * complex(re, im)
    if T.kind == "constant":
        raise ValidationError("the lattice functional needs a temporally decaying profile")
    if method == "direct":
        return _direct_slot(T, block, d, L)
    lo, hi = T.support()
    ext = block.half_extent() + float(np.max(np.abs(np.concatenate(block.centers(d)))))
    step = panel if panel is not None else min(0.25, 0.5 / max(1e-9, block.width * ext))
    return _composite_gl(lambda s: T(s) * _slot_factor(s, block, d, L, "auto"), lo, hi, step)


def _direct_slot(T: TemporalProfile, block: SpatialBlock, d: int, L: float, budget: float = 2e7) -> complex:
    """Lattice sum over ``z`` of the closed-form temporal transform at ``x . y``."""
    ax, by = block.centers(d)
    half = block.half_extent()
    xs = [_lattice_points(L, ax[i], half) for i in range(d)]
    ys = [_lattice_points(L, by[i], half) for i in range(d)]
    count = float(np.prod([len(v) for v in xs + ys]))
    if count > budget:
        raise BudgetError(f"direct lattice sum over {count:.3g} points exceeds the budget")
    X = np.stack(np.meshgrid(*xs, indexing="ij"), axis=-1).reshape(-1, d)
    Y = np.stack(np.meshgrid(*ys, indexing="ij"), axis=-1).reshape(-1, d)
    wx = np.prod(block.profile((X - ax) / block.width), axis=1)
    wy = np.prod(block.profile((Y - by) / block.width), axis=1)
    total = 0.0 + 0.0j
    step = max(1, int(4e6 // max(1, len(Y))))
    for start in range(0, len(X), step):
        dots = X[start : start + step] @ Y.T
        total += np.sum(wx[start : start + step, None] * wy[None, :] * T.fourier(dots))
    return total / L ** (2 * d)


def osc_functional(
    phi: SeparableTestFunction, L: float, method: str = "auto", panel: float | None = None
) -> complex:
    """``S_L(phi)`` for finite ``L`` or ``S_inf(phi)`` for ``L = inf``.

    Parameters
    ----------
    method : {"auto", "direct"}
        ``"direct"`` sums the closed-form temporal transform over the full
        lattice (small grids only); ``"auto"`` integrates the factorized
        lattice sum against the temporal profile.
    panel : float, optional
        Panel width of the composite Gauss-Legendre rule in ``s``.
    """
    out = 1.0 + 0.0j
    for T, block in zip(phi.temporal, phi.spatial):
        out *= _slot_value(T, block, phi.d, L, method, panel)
    return out


def continuum_reference(d: int = 3) -> float:
    """``int (1 + s^2)^(-d/2) ds``: the trace functional of the unit Gaussian datum."""
    val, _ = integrate.quad(lambda s: (1.0 + s * s) ** (-d / 2.0), -np.inf, np.inf, epsabs=1e-12, epsrel=1e-12)
    return val


def convergence_sweep(
    Ls: Sequence[int] = (4, 8, 16, 32),
    alphas: Sequence[float] = (0.5, 1.0),
    phi: SeparableTestFunction | None = None,
) -> list[dict]:
    """Rows ``(L, alpha, value_re, value_im, reference, abs_error)`` comparing the scaled lattice functional to its limit."""
    phi = phi or SeparableTestFunction.gaussian(1, 3)
    ref = osc_functional(scale_theta(phi, INFINITY, 1.0), INFINITY)
    rows = []
    for alpha in alphas:
        for L in Ls:
            val = osc_functional(scale_theta(phi, float(L), alpha), float(L))
            rows.append(
                {
                    "L": L,
                    "alpha": alpha,
                    "value_re": val.real,
                    "value_im": val.imag,
                    "reference": ref.real,
                    "abs_error": abs(val - ref),
                }
            )
    return rows
