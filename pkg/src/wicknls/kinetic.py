"""Wave kinetic solvers on uniform grids.

``W`` lives on a cubic k-grid (optionally times a 1-D slab x-grid along the
first coordinate); ``E`` adds a cubic zeta-grid.  The collision integral
``2 int delta(Omega) f(k1) g(k2) h(k3)`` is evaluated with the product
quadrature of :mod:`wicknls.spectra` and trilinear (or cubic B-spline)
interpolation, zero outside the grid.  The zeta-convolution of the
second-microlocal equation is a pointwise product in the dual variable,
computed with real FFTs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numba
import numpy as np
from scipy import ndimage

from .errors import ConvergenceError, InstabilityError, UnsupportedError, ValidationError
from .spectra import InitialProfile, ResonantQuadrature, wigner

Scheme = Literal["RK4", "Picard"]
SOLVER_QUADRATURE = ResonantQuadrature(radial=10, polar=6, azimuth=8, plane_radial=10, plane_angle=8)


@dataclass(frozen=True)
class KGrid:
    """Uniform grids symmetric about 0.

    ``m`` points per k-axis on ``[-k_max, k_max]^d``; optional slab x-grid
    (``x_points`` on ``[-x_extent, x_extent]`` along the first coordinate)
    and cubic zeta-grid.
    """

    d: int = 3
    k_max: float = 1.5
    m: int = 17
    x_extent: float | None = None
    x_points: int | None = None
    zeta_extent: float | None = None
    zeta_points: int | None = None

    def __post_init__(self) -> None:
        if self.d != 3:
            raise UnsupportedError("kinetic solvers are implemented for d = 3")
        if self.m < 2 or self.k_max <= 0:
            raise ValidationError("KGrid needs m >= 2 and k_max > 0")
        if (self.x_extent is None) != (self.x_points is None):
            raise ValidationError("x_extent and x_points go together")
        if (self.zeta_extent is None) != (self.zeta_points is None):
            raise ValidationError("zeta_extent and zeta_points go together")
        if self.x_points is not None and (self.x_points < 1 or self.x_extent < 0):
            raise ValidationError("invalid x-grid")
        if self.zeta_points is not None and (self.zeta_points < 2 or self.zeta_extent <= 0):
            raise ValidationError("invalid zeta-grid")

    @property
    def k_axis(self) -> np.ndarray:
        return np.linspace(-self.k_max, self.k_max, self.m)

    @property
    def h(self) -> float:
        return 2 * self.k_max / (self.m - 1)

    @property
    def k_points(self) -> np.ndarray:
        ax = self.k_axis
        return np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)

    @property
    def x_axis(self) -> np.ndarray:
        if self.x_points is None:
            return np.zeros(1)
        if self.x_points == 1:
            return np.zeros(1)
        return np.linspace(-self.x_extent, self.x_extent, self.x_points)

    @property
    def x_positions(self) -> np.ndarray:
        """Slab positions as vectors ``(nx, d)``."""
        out = np.zeros((len(self.x_axis), self.d))
        out[:, 0] = self.x_axis
        return out

    @property
    def zeta_axis(self) -> np.ndarray:
        if self.zeta_points is None:
            raise ValidationError("grid has no zeta axis")
        return np.linspace(-self.zeta_extent, self.zeta_extent, self.zeta_points)

    @property
    def dzeta(self) -> float:
        ax = self.zeta_axis
        return float(ax[1] - ax[0])

    @property
    def inhomogeneous(self) -> bool:
        return self.x_points is not None

    def spec(self) -> dict:
        return {
            "d": self.d, "k_max": self.k_max, "m": self.m,
            "x_extent": self.x_extent, "x_points": self.x_points,
            "zeta_extent": self.zeta_extent, "zeta_points": self.zeta_points,
        }

    def check_support(self, profile: InitialProfile) -> None:
        """``k_max`` must exceed three e-folding radii of ``|psi|^2``."""
        r = float(np.linalg.norm(profile.k0)) + 1.0 / np.sqrt(2 * profile.k_decay)
        if self.k_max < 3 * r:
            raise ValidationError(f"k_max = {self.k_max} must be at least 3 x support radius {r:.4g}")


@dataclass
class KineticState:
    """Unknown of WK (``variant="W"``) or of its second-microlocal refinement (``"E"``).

    Array layout: ``(nx?, m, m, m, nz?, nz?, nz?)`` where the x axis is
    present only on inhomogeneous grids.
    """

    variant: Literal["W", "E"]
    data: np.ndarray
    grid: KGrid
    time: float = 0.0

    def __post_init__(self) -> None:
        if self.variant not in ("W", "E"):
            raise ValidationError("variant must be 'W' or 'E'")
        shape = self.expected_shape(self.variant, self.grid)
        if self.data.shape != shape:
            raise ValidationError(f"state shape {self.data.shape} != expected {shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValidationError("state contains non-finite values")

    @staticmethod
    def expected_shape(variant: str, grid: KGrid) -> tuple[int, ...]:
        shape: tuple[int, ...] = (grid.m,) * 3
        if grid.inhomogeneous:
            shape = (len(grid.x_axis),) + shape
        if variant == "E":
            shape = shape + (grid.zeta_points,) * 3
        return shape

    def copy(self, data: np.ndarray | None = None, time: float | None = None) -> "KineticState":
        return KineticState(self.variant, self.data.copy() if data is None else data, self.grid,
                            self.time if time is None else time)


def initial_W(profile: InitialProfile, grid: KGrid) -> KineticState:
    """``|phi(x, k)|^2`` on the grid (``x = 0`` for homogeneous grids)."""
    grid.check_support(profile)
    kp = grid.k_points
    if grid.inhomogeneous:
        vals = np.stack([np.abs(profile.phi(x, kp)) ** 2 for x in grid.x_positions])
        data = vals.reshape((len(grid.x_axis),) + (grid.m,) * 3)
    else:
        data = (np.abs(profile.phi(np.zeros(3), kp)) ** 2).reshape((grid.m,) * 3)
    return KineticState("W", data, grid)


def initial_E(profile: InitialProfile, grid: KGrid) -> KineticState:
    """Wigner transform of ``phi(., k)`` on the (x,) k and zeta grids."""
    grid.check_support(profile)
    kp = grid.k_points
    za = grid.zeta_axis
    Z = np.stack(np.meshgrid(za, za, za, indexing="ij"), axis=-1).reshape(-1, 3)
    rows = []
    for x in grid.x_positions:
        vals = np.stack([wigner(profile, k, x, Z) for k in kp])
        rows.append(vals.reshape((grid.m,) * 3 + (len(za),) * 3))
    data = np.stack(rows) if grid.inhomogeneous else rows[0]
    return KineticState("E", data, grid)


def marginalize_zeta(state: KineticState) -> KineticState:
    """Trapezoid integration over the zeta axes."""
    if state.variant != "E":
        raise ValidationError("marginalize_zeta needs an E state")
    n = state.grid.zeta_points
    w1 = np.full(n, state.grid.dzeta)
    w1[[0, -1]] *= 0.5
    W = np.einsum("...abc,a,b,c->...", state.data, w1, w1, w1)
    return KineticState("W", np.real(W), state.grid, state.time)


# ---------------------------------------------------------------------------
# collision kernel
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _stencil_weights(f, width, out):
    if width == 2:
        out[0] = 1.0 - f
        out[1] = f
    else:  # cubic B-spline at offsets -1, 0, 1, 2
        g = 1.0 - f
        out[0] = g * g * g / 6.0
        out[1] = (3.0 * f * f * f - 6.0 * f * f + 4.0) / 6.0
        out[2] = (-3.0 * f * f * f + 3.0 * f * f + 3.0 * f + 1.0) / 6.0
        out[3] = f * f * f / 6.0


@numba.njit(cache=True)
def _factor_value(j, px, py, pz, g, mode, width, kmax, h, m, k0, beta, amp, v, wts):
    """Value of factor ``j`` at ``p``; ``g`` is padded by ``width // 2`` zero layers."""
    C = v.shape[1]
    if mode == 1:
        dx, dy, dz = px - k0[0], py - k0[1], pz - k0[2]
        e = beta * (dx * dx + dy * dy + dz * dz)
        if e > 700.0:
            return False
        s = np.exp(-e)
        for c in range(C):
            v[j, c] = s * amp[c]
        return True
    ux = (px + kmax) / h
    uy = (py + kmax) / h
    uz = (pz + kmax) / h
    ix = int(np.floor(ux))
    iy = int(np.floor(uy))
    iz = int(np.floor(uz))
    if ix < -1 or iy < -1 or iz < -1 or ix > m - 1 or iy > m - 1 or iz > m - 1:
        return False
    _stencil_weights(ux - ix, width, wts[0])
    _stencil_weights(uy - iy, width, wts[1])
    _stencil_weights(uz - iz, width, wts[2])
    for c in range(C):
        v[j, c] = 0.0
    for cx in range(width):
        for cy in range(width):
            wxy = wts[0, cx] * wts[1, cy]
            for cz in range(width):
                wt = wxy * wts[2, cz]
                for c in range(C):
                    v[j, c] += wt * g[ix + 1 + cx, iy + 1 + cy, iz + 1 + cz, c]
    return True


@numba.njit(cache=True)
def _collide(targets, a, b, w, g1, g2, g3, modes, width, kmax, h, m, k0, beta, amp1, amp2, amp3, conj_mid, out):
    P = targets.shape[0]
    Nq = w.shape[0]
    C = out.shape[1]
    v = np.zeros((3, C), dtype=out.dtype)
    wts = np.zeros((3, width))
    for p in range(P):
        tx, ty, tz = targets[p, 0], targets[p, 1], targets[p, 2]
        for q in range(Nq):
            ax, ay, az = a[q, 0], a[q, 1], a[q, 2]
            bx, by, bz = b[q, 0], b[q, 1], b[q, 2]
            if not _factor_value(0, tx + ax, ty + ay, tz + az, g1, modes[0], width, kmax, h, m, k0, beta, amp1, v, wts):
                continue
            if not _factor_value(1, tx + ax + bx, ty + ay + by, tz + az + bz, g2, modes[1], width, kmax, h, m, k0,
                                 beta, amp2, v, wts):
                continue
            if not _factor_value(2, tx + bx, ty + by, tz + bz, g3, modes[2], width, kmax, h, m, k0, beta, amp3, v, wts):
                continue
            wq = w[q]
            if conj_mid:
                for c in range(C):
                    out[p, c] += wq * v[0, c] * np.conj(v[1, c]) * v[2, c]
            else:
                for c in range(C):
                    out[p, c] += wq * v[0, c] * v[1, c] * v[2, c]


@numba.njit(cache=True)
def _collide_grid(gp1, gp2, gp3, modes, offs, fr, w, m, width, kaxis, k0, beta, amp1, amp2, amp3, h,
                  conj_mid, out):
    """Grid targets: one separable stencil per node, shared by every target.

    Factor arrays are padded by ``pad = width // 2`` zero layers; the stencil
    of target ``i`` starts at padded index ``i + offset + 1 - pad + pad``.
    Interpolation runs as three one-dimensional passes over the box of
    targets whose stencils stay inside the padded array.
    """
    Nq = w.shape[0]
    C = out.shape[3]
    pad = width // 2
    mp = m + 2 * pad
    buf = np.zeros((3, m, m, m, C), dtype=out.dtype)
    t1 = np.zeros((mp, mp, m, C), dtype=out.dtype)
    t2 = np.zeros((mp, m, m, C), dtype=out.dtype)
    ex = np.zeros((3, m))
    wx = np.zeros((3, width))
    lo = np.zeros(3, np.int64)
    hi = np.zeros(3, np.int64)
    st = np.zeros(3, np.int64)
    for q in range(Nq):
        for ax in range(3):
            lo[ax] = 0
            hi[ax] = m - 1
        for j in range(3):
            if modes[j] == 0:
                for ax in range(3):
                    lo[ax] = max(lo[ax], -1 - offs[q, j, ax])
                    hi[ax] = min(hi[ax], m - 1 - offs[q, j, ax])
        if lo[0] > hi[0] or lo[1] > hi[1] or lo[2] > hi[2]:
            continue
        for j in range(3):
            if modes[j] == 1:
                amp = amp1 if j == 0 else (amp2 if j == 1 else amp3)
                for ax in range(3):
                    disp = (offs[q, j, ax] + fr[q, j, ax]) * h
                    for i in range(lo[ax], hi[ax] + 1):
                        dd = kaxis[i] + disp - k0[ax]
                        ex[ax, i] = np.exp(-beta * dd * dd)
                for ix in range(lo[0], hi[0] + 1):
                    for iy in range(lo[1], hi[1] + 1):
                        sxy = ex[0, ix] * ex[1, iy]
                        for iz in range(lo[2], hi[2] + 1):
                            sc = sxy * ex[2, iz]
                            for c in range(C):
                                buf[j, ix, iy, iz, c] = sc * amp[c]
                continue
            g = gp1 if j == 0 else (gp2 if j == 1 else gp3)
            for ax in range(3):
                _stencil_weights(fr[q, j, ax], width, wx[ax])
                st[ax] = offs[q, j, ax] + 1  # padded start of the stencil, minus the target index
            # pass along z
            for px in range(lo[0] + st[0], hi[0] + st[0] + width):
                for py in range(lo[1] + st[1], hi[1] + st[1] + width):
                    for iz in range(lo[2], hi[2] + 1):
                        bz = iz + st[2]
                        for c in range(C):
                            acc = wx[2, 0] * g[px, py, bz, c]
                            for u in range(1, width):
                                acc += wx[2, u] * g[px, py, bz + u, c]
                            t1[px, py, iz, c] = acc
            # pass along y
            for px in range(lo[0] + st[0], hi[0] + st[0] + width):
                for iy in range(lo[1], hi[1] + 1):
                    by = iy + st[1]
                    for iz in range(lo[2], hi[2] + 1):
                        for c in range(C):
                            acc = wx[1, 0] * t1[px, by, iz, c]
                            for u in range(1, width):
                                acc += wx[1, u] * t1[px, by + u, iz, c]
                            t2[px, iy, iz, c] = acc
            # pass along x
            for ix in range(lo[0], hi[0] + 1):
                bx = ix + st[0]
                for iy in range(lo[1], hi[1] + 1):
                    for iz in range(lo[2], hi[2] + 1):
                        for c in range(C):
                            acc = wx[0, 0] * t2[bx, iy, iz, c]
                            for u in range(1, width):
                                acc += wx[0, u] * t2[bx + u, iy, iz, c]
                            buf[j, ix, iy, iz, c] = acc
        wq = w[q]
        for ix in range(lo[0], hi[0] + 1):
            for iy in range(lo[1], hi[1] + 1):
                for iz in range(lo[2], hi[2] + 1):
                    for c in range(C):
                        mid = buf[1, ix, iy, iz, c]
                        if conj_mid:
                            mid = np.conj(mid)
                        out[ix, iy, iz, c] += wq * buf[0, ix, iy, iz, c] * mid * buf[2, ix, iy, iz, c]


@dataclass(frozen=True)
class GaussianSource:
    """Exact factor ``amp[c] * exp(-beta |k - k0|^2)`` per column ``c`` (e.g. the initial datum)."""

    k0: tuple[float, float, float]
    beta: float
    amp: np.ndarray

    @staticmethod
    def initial(profile: InitialProfile, grid: KGrid) -> "GaussianSource":
        amps = np.array([profile.amplitude**2 * float(profile.chi(x)) ** 2 for x in grid.x_positions])
        if not grid.inhomogeneous:
            amps = np.array([profile.amplitude**2 * float(profile.chi(np.zeros(3))) ** 2])
        return GaussianSource(tuple(profile.k0), 2 * profile.k_decay, amps)


def solver_rcut(grid: KGrid) -> float:
    return 2.0 * grid.k_max


Interpolation = Literal["linear", "cubic"]


def _spline_coefficients(f: np.ndarray) -> np.ndarray:
    """Cubic B-spline coefficients of grid data (zero outside), along the three k axes."""
    def filt(x):
        for ax in range(3):
            x = ndimage.spline_filter1d(x, order=3, axis=ax, mode="grid-constant")
        return x

    if np.iscomplexobj(f):
        return filt(f.real) + 1j * filt(f.imag)
    return filt(f)


def collision_columns(
    factors: Sequence[np.ndarray | GaussianSource],
    grid: KGrid,
    quadrature: ResonantQuadrature = SOLVER_QUADRATURE,
    targets: np.ndarray | None = None,
    conj_mid: bool = False,
    interpolation: Interpolation = "linear",
) -> np.ndarray:
    """``2 int delta(Omega) f1(k1) f2(k2) f3(k3)`` per target and column.

    Each factor is either a column array of shape ``(m, m, m, C)``
    (interpolated: trilinear, or cubic B-spline) or a
    :class:`GaussianSource` (evaluated exactly).  Returns ``(P, C)`` for
    ``P`` targets (default: the k-grid points).  Trilinear interpolation
    keeps non-negative data non-negative; the cubic spline is more
    accurate for smooth data but may undershoot.
    """
    if len(factors) != 3:
        raise ValidationError("collision needs three factors")
    if interpolation not in ("linear", "cubic"):
        raise ValidationError(f"unknown interpolation {interpolation!r}")
    width = 2 if interpolation == "linear" else 4
    pad = width // 2
    arrays = [f for f in factors if not isinstance(f, GaussianSource)]
    dtype = np.result_type(*[f.dtype for f in arrays]) if arrays else np.float64
    if any(isinstance(f, GaussianSource) and np.iscomplexobj(f.amp) for f in factors):
        dtype = np.result_type(dtype, np.complex128)
    C = arrays[0].shape[-1] if arrays else len(factors[0].amp)
    gauss = next((f for f in factors if isinstance(f, GaussianSource)), None)
    dummy = np.zeros((1, 1, 1, C), dtype=dtype)
    gs, modes, amps = [], [], []
    prepared: dict[int, np.ndarray] = {}
    for f in factors:
        if isinstance(f, GaussianSource):
            if gauss is not None and (f.k0 != gauss.k0 or f.beta != gauss.beta):
                raise ValidationError("exact factors must share centre and width")
            if len(f.amp) != C:
                raise ValidationError("exact factors need one amplitude per column")
            gs.append(dummy)
            modes.append(1)
            amps.append(np.asarray(f.amp, dtype=dtype))
            continue
        if f.shape != (grid.m,) * 3 + (C,):
            raise ValidationError("factor arrays must have shape (m, m, m, C)")
        if id(f) not in prepared:  # shared factors are filtered and padded once
            x = np.asarray(f, dtype=dtype)
            if interpolation == "cubic":
                x = _spline_coefficients(x)
            prepared[id(f)] = np.ascontiguousarray(np.pad(x, ((pad, pad),) * 3 + ((0, 0),)))
        gs.append(prepared[id(f)])
        modes.append(0)
        amps.append(np.zeros(C, dtype=dtype))
    k0 = np.asarray(gauss.k0 if gauss else (0.0, 0.0, 0.0), dtype=float)
    beta = float(gauss.beta) if gauss else 0.0
    a, b, w = quadrature.nodes(3, quadrature.rcut or solver_rcut(grid))
    modes_arr = np.array(modes, dtype=np.int64)
    if targets is None:
        disp = np.stack([a, a + b, b], axis=1) / grid.h  # (Nq, 3, 3)
        offs = np.floor(disp).astype(np.int64)
        fr = disp - offs
        out = np.zeros((grid.m,) * 3 + (C,), dtype=dtype)
        _collide_grid(gs[0], gs[1], gs[2], modes_arr, offs, fr, w, int(grid.m), width, grid.k_axis, k0, beta,
                      amps[0], amps[1], amps[2], float(grid.h), bool(conj_mid), out)
        return 2.0 * out.reshape(-1, C)
    tg = np.asarray(targets, dtype=float).reshape(-1, 3)
    out = np.zeros((len(tg), C), dtype=dtype)
    _collide(tg, a, b, w, gs[0], gs[1], gs[2], modes_arr, width, float(grid.k_max), float(grid.h),
             int(grid.m), k0, beta, amps[0], amps[1], amps[2], bool(conj_mid), out)
    return 2.0 * out


def _w_columns(state: KineticState) -> np.ndarray:
    """W data as ``(m, m, m, nx)``."""
    if state.grid.inhomogeneous:
        return np.moveaxis(state.data, 0, -1)
    return state.data[..., None]


def _w_from_columns(cols: np.ndarray, grid: KGrid) -> np.ndarray:
    if grid.inhomogeneous:
        return np.moveaxis(cols.reshape((grid.m,) * 3 + (cols.shape[-1],)), -1, 0)
    return cols.reshape((grid.m,) * 3)


def collision_WK(
    state: KineticState,
    quadrature: ResonantQuadrature = SOLVER_QUADRATURE,
    interpolation: Interpolation = "linear",
) -> np.ndarray:
    """Collision rate of WK on the grid, same shape as ``state.data``."""
    if state.variant != "W":
        raise ValidationError("collision_WK needs a W state")
    cols = _w_columns(state)
    out = collision_columns([cols, cols, cols], state.grid, quadrature, interpolation=interpolation)
    return _w_from_columns(out, state.grid)


# -- second microlocal


def _zeta_fft_size(nz: int, mode: str) -> int:
    if mode == "linear":
        return 2 * nz - 1
    if mode == "periodic":
        return nz
    raise ValidationError(f"unknown zeta convolution mode {mode!r}")


def collision_WK2(
    state: KineticState,
    quadrature: ResonantQuadrature = SOLVER_QUADRATURE,
    zeta_mode: Literal["linear", "periodic"] = "linear",
    interpolation: Interpolation = "linear",
) -> np.ndarray:
    """Collision rate of the second-microlocal equation, same shape as ``state.data``.

    ``zeta_mode="linear"`` reproduces the direct grid sum
    ``dz^(2d) sum_{n1 - n2 + n3 = n} E1 E2 E3`` restricted to the grid
    (zero padding); ``"periodic"`` treats the zeta-grid as a torus and needs
    no padding.
    """
    if state.variant != "E":
        raise ValidationError("collision_WK2 needs an E state")
    g = state.grid
    nz = g.zeta_points
    P = _zeta_fft_size(nz, zeta_mode)
    dz3 = g.dzeta**3
    data = state.data if g.inhomogeneous else state.data[None]
    nx = data.shape[0]
    spec = np.fft.rfftn(data, s=(P, P, P), axes=(-3, -2, -1)) * dz3  # (nx, m, m, m, P, P, P//2+1)
    cshape = spec.shape[-3:]
    cols = np.moveaxis(spec, 0, 3).reshape((g.m,) * 3 + (-1,))
    rate = collision_columns([cols, cols, cols], g, quadrature, conj_mid=True, interpolation=interpolation)
    rate = np.moveaxis(rate.reshape((g.m,) * 3 + (nx,) + cshape), 3, 0)
    back = np.fft.irfftn(rate, s=(P, P, P), axes=(-3, -2, -1))[..., :nz, :nz, :nz] / dz3
    return back if g.inhomogeneous else back[0]


def rate(
    state: KineticState,
    quadrature: ResonantQuadrature = SOLVER_QUADRATURE,
    zeta_mode: str = "linear",
    interpolation: Interpolation = "linear",
) -> np.ndarray:
    if state.variant == "W":
        return collision_WK(state, quadrature, interpolation)
    return collision_WK2(state, quadrature, zeta_mode, interpolation)


# ---------------------------------------------------------------------------
# transport
# ---------------------------------------------------------------------------


def transport_shift(state: KineticState, dt: float) -> KineticState:
    """Semi-Lagrangian step ``W(x) <- W(x - dt k_1)`` along the slab axis.

    Linear interpolation in ``x`` with linear extrapolation at the ends, so
    data affine in ``x`` are transported exactly.
    """
    g = state.grid
    if not g.inhomogeneous:
        raise ValidationError("transport needs an x-grid")
    xs = g.x_axis
    nx = len(xs)
    if nx == 1:
        return state.copy(time=state.time)
    dx = xs[1] - xs[0]
    k1 = g.k_axis
    data = state.data
    out = np.empty_like(data)
    for i, kv in enumerate(k1):
        src = (xs - dt * kv - xs[0]) / dx
        j = np.clip(np.floor(src).astype(int), 0, nx - 2)
        f = (src - j)[:, None, None] if data.ndim == 4 else (src - j).reshape((-1,) + (1,) * (data.ndim - 2))
        sl = data[:, i]
        out[:, i] = (1 - f) * sl[j] + f * sl[j + 1]
    return state.copy(out)


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    variant: str = "W"
    grid: KGrid | None = None
    meta: dict = field(default_factory=dict)

    def append(self, t: float, data: np.ndarray) -> None:
        self.times.append(float(t))
        self.states.append(np.array(data, copy=True))

    @property
    def final(self) -> KineticState:
        return KineticState(self.variant, self.states[-1], self.grid, self.times[-1])

    def array(self) -> np.ndarray:
        return np.stack(self.states)


def _time_nodes(T: float, dt: float) -> np.ndarray:
    if dt <= 0:
        raise ValidationError("dt must be positive")
    n = max(1, int(np.ceil(T / dt - 1e-12)))
    return np.linspace(0.0, T, n + 1)


def _transport_on(regime: str) -> bool:
    if regime not in ("homogeneous", "semi-homogeneous", "inhomogeneous"):
        raise ValidationError(f"unknown regime {regime!r}")
    return regime == "inhomogeneous"


def _rk4(state: KineticState, T: float, dt: float, regime: str, quadrature, zeta_mode, growth_guard: float,
         interpolation: Interpolation) -> Trajectory:
    times = _time_nodes(T, dt)
    transport = _transport_on(regime)
    if transport and not state.grid.inhomogeneous:
        raise ValidationError("the transport regime needs an x-grid")
    traj = Trajectory(variant=state.variant, grid=state.grid)
    cur = state.copy()
    traj.append(times[0], cur.data)
    scale = max(float(np.max(np.abs(cur.data))), 1e-300)
    f = lambda y: rate(cur.copy(y), quadrature, zeta_mode, interpolation)  # noqa: E731
    for t0, t1 in zip(times[:-1], times[1:]):
        h = t1 - t0
        if transport:
            cur = transport_shift(cur, h / 2)
        y = cur.data
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > growth_guard * scale:
            raise InstabilityError(f"RK4 blow-up detected at t = {t1:.4g}")
        cur = cur.copy(y, t1)
        if transport:
            cur = transport_shift(cur, h / 2)
        cur.time = t1
        traj.append(t1, cur.data)
    return traj


def _compositions(total: int):
    for m1 in range(total + 1):
        for m2 in range(total - m1 + 1):
            yield m1, m2, total - m1 - m2


def _duhamel_level(
    coeffs: list[np.ndarray],
    m: int,
    grid: KGrid,
    quadrature: ResonantQuadrature,
    exact_initial: GaussianSource | None,
    targets: np.ndarray | None = None,
    interpolation: Interpolation = "linear",
) -> np.ndarray:
    """``(1/m) sum_{m1+m2+m3=m-1} 2 int delta(Omega) A_m1 A_m2 A_m3`` as columns ``(P, C)``.

    All ordered compositions are summed (the quadrature is not exactly
    symmetric in ``k1 <-> k3``, and the iterates must match the discrete
    right-hand side).  Compositions sharing a pattern of exact factors are
    stacked as columns of one kernel call.
    """
    C = coeffs[0].shape[-1]
    groups: dict[tuple[bool, ...], list[tuple[int, int, int]]] = {}
    for comp in _compositions(m - 1):
        pattern = tuple(exact_initial is not None and mj == 0 for mj in comp)
        groups.setdefault(pattern, []).append(comp)
    acc = None
    for pattern, comps in groups.items():
        fs: list = []
        for j in range(3):
            if pattern[j]:
                fs.append(replace(exact_initial, amp=np.tile(np.asarray(exact_initial.amp), len(comps))))
            else:
                fs.append(np.concatenate([coeffs[c[j]] for c in comps], axis=-1))
        val = collision_columns(fs, grid, quadrature, targets=targets, interpolation=interpolation)
        val = val.reshape(val.shape[0], len(comps), C).sum(axis=1)
        acc = val if acc is None else acc + val
    return acc / m


def picard_coefficients(
    state: KineticState,
    order: int,
    quadrature: ResonantQuadrature = SOLVER_QUADRATURE,
    exact_initial: GaussianSource | None = None,
    targets: np.ndarray | None = None,
    interpolation: Interpolation = "linear",
) -> list[np.ndarray]:
    """Duhamel iterate coefficients ``A_0, ..., A_order`` with ``W(t) = sum t^m A_m``.

    ``A_m = (1/m) sum_{m1+m2+m3=m-1} 2 int delta(Omega) A_m1 A_m2 A_m3``.
    ``A_0`` is read from the grid, or evaluated exactly when
    ``exact_initial`` is given.  With ``targets`` the last coefficient is
    evaluated at those points only (columns ``(P, C)``).
    """
    if state.variant != "W":
        raise UnsupportedError("Picard iterates are implemented for W states")
    g = state.grid
    cols = [_w_columns(state).astype(float)]
    for m in range(1, order + 1):
        last = m == order and targets is not None
        acc = _duhamel_level(cols, m, g, quadrature, exact_initial, targets if last else None, interpolation)
        cols.append(acc if last else acc.reshape((g.m,) * 3 + (-1,)))
    return cols


def _picard(state: KineticState, T: float, dt: float, regime: str, quadrature, tol: float, max_iter: int,
            exact_initial: GaussianSource | None, interpolation: Interpolation) -> Trajectory:
    if _transport_on(regime):
        raise UnsupportedError("Picard iteration is implemented without transport; use RK4")
    if state.variant != "W":
        raise UnsupportedError("Picard iteration is implemented for W states")
    times = _time_nodes(T, dt)
    g = state.grid
    coeffs = [_w_columns(state).astype(float)]
    partial = [coeffs[0].copy() for _ in times]
    converged = False
    for m in range(1, max_iter + 1):
        level = _duhamel_level(coeffs, m, g, quadrature, exact_initial, interpolation=interpolation)
        coeffs.append(level.reshape(coeffs[0].shape))
        incr = 0.0
        for i, t in enumerate(times):
            term = t**m * coeffs[m]
            partial[i] = partial[i] + term
            incr = max(incr, float(np.max(np.abs(term))))
        if not np.all(np.isfinite(partial[-1])):
            raise ConvergenceError("Picard iterates became non-finite")
        if incr <= tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(f"Picard iteration did not reach tolerance {tol} in {max_iter} iterates")
    traj = Trajectory(variant="W", grid=g, meta={"iterates": len(coeffs) - 1})
    for t, cols in zip(times, partial):
        traj.append(t, _w_from_columns(cols.reshape(-1, cols.shape[-1]), g))
    return traj


def solve(
    state0: KineticState,
    T: float,
    dt: float,
    scheme: Scheme = "RK4",
    regime: str = "homogeneous",
    quadrature: ResonantQuadrature = SOLVER_QUADRATURE,
    zeta_mode: Literal["linear", "periodic"] = "linear",
    tol: float = 1e-8,
    max_iter: int = 20,
    growth_guard: float = 1e6,
    exact_initial: GaussianSource | None = None,
    max_time: float = 1.0,
    interpolation: Interpolation = "linear",
) -> Trajectory:
    """Evolve ``state0`` to time ``T``; records the state at every multiple of ``dt``.

    ``RK4`` uses Strang splitting (half transport, collision, half
    transport) in the ``inhomogeneous`` regime; ``Picard`` sums the Duhamel
    iterates until the sup-norm increment falls below ``tol``.
    """
    if not 0 < T <= max_time:
        raise ValidationError(f"T must lie in (0, {max_time}]")
    if scheme == "RK4":
        traj = _rk4(state0, T, dt, regime, quadrature, zeta_mode, growth_guard, interpolation)
    elif scheme == "Picard":
        traj = _picard(state0, T, dt, regime, quadrature, tol, max_iter, exact_initial, interpolation)
    else:
        raise ValidationError(f"unknown scheme {scheme!r}")
    traj.meta.update({"scheme": scheme, "regime": regime, "dt": dt, "T": T, "zeta_mode": zeta_mode,
                      "interpolation": interpolation})
    return traj


def total_mass(state: KineticState) -> np.ndarray:
    """``int W dk`` (per x column) by the trapezoid rule."""
    if state.variant == "E":
        state = marginalize_zeta(state)
    g = state.grid
    w1 = np.full(g.m, g.h)
    w1[[0, -1]] *= 0.5
    return np.einsum("...abc,a,b,c->...", state.data, w1, w1, w1)


__all__ = [
    "KGrid",
    "KineticState",
    "GaussianSource",
    "SOLVER_QUADRATURE",
    "Trajectory",
    "initial_W",
    "initial_E",
    "collision_columns",
    "collision_WK",
    "collision_WK2",
    "transport_shift",
    "solve",
    "picard_coefficients",
    "marginalize_zeta",
    "total_mass",
    "solver_rcut",
]
