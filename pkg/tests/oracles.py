"""Independent reference values, computed without the package's own routines."""

from __future__ import annotations

import itertools
import math

import numpy as np


def collision_at_zero(amp: float, beta: float) -> float:
    """``2 int delta(a . b) f(a) f(a + b) f(b)`` for ``f = amp exp(-beta |k|^2)`` in 3-d.

    On the resonant set ``a . b = 0`` the exponent is ``-2 beta (|a|^2 + |b|^2)``;
    the plane integral gives ``pi / (2 beta)`` and the ``da / |a|`` integral ``pi / beta``.
    """
    return 2.0 * amp**3 * (math.pi / (2 * beta)) * (math.pi / beta)


def order_one_at_zero(k_decay: float) -> float:
    """Order-one kinetic spectrum at ``t = 1, k = 0`` for ``|psi|^2 = exp(-2 k_decay |k|^2)``."""
    return collision_at_zero(1.0, 2 * k_decay) / 2


def collision_mc(amp: float, beta: float, nsamples: int, seed: int, width: float = 0.005) -> tuple[float, float]:
    """Monte Carlo estimate of :func:`collision_at_zero` with a mollified delta of the given width.

    ``a, b`` are drawn from ``N(0, s^2 I)``; the delta is a Gaussian of standard deviation ``width``.
    Returns ``(mean, standard error)``.
    """
    rng = np.random.default_rng(seed)
    s = 1.0 / math.sqrt(2 * beta)
    a = rng.normal(0, s, (nsamples, 3))
    b = rng.normal(0, s, (nsamples, 3))
    dens = np.exp(-(np.sum(a * a, 1) + np.sum(b * b, 1)) / (2 * s * s)) / (2 * math.pi * s * s) ** 3
    om = np.sum(a * b, 1)
    delta = np.exp(-0.5 * (om / width) ** 2) / (width * math.sqrt(2 * math.pi))
    f = amp**3 * np.exp(-beta * (np.sum(a * a, 1) + np.sum((a + b) ** 2, 1) + np.sum(b * b, 1)))
    vals = 2 * f * delta / dens
    return float(vals.mean()), float(vals.std() / math.sqrt(nsamples))


def order_one_lattice_count(k_int, L: int, R: float, gamma: float) -> int:
    """Brute-force order-one quasi-resonant count.

    Decorations are ``k1, k3`` with ``k2 = k1 + k3 - k``, all three in the closed ball
    of radius ``R L`` (integer units), and ``|gamma (k1 - k) . (k3 - k)| / L^2 <= 1``.
    """
    k = np.asarray(k_int)
    m = int(math.floor(R * L))
    pts = [np.array(p) for p in itertools.product(range(-m, m + 1), repeat=3) if sum(x * x for x in p) <= (R * L) ** 2]
    r2 = (R * L) ** 2 + 1e-9
    count = 0
    for k1 in pts:
        for k3 in pts:
            k2 = k1 + k3 - k
            if k2 @ k2 > r2:
                continue
            om = (k1 - k) @ (k3 - k) / L**2
            if abs(gamma * om) <= 1 + 1e-9:
                count += 1
    return count


def simplex_chain_theta(omegas, t: float, nodes: int = 40) -> complex:
    """``int_{t > s1 > ... > sn > 0} prod exp(2 pi i omega_j s_j)`` by a nested tensor Gauss-Legendre rule."""
    x, w = np.polynomial.legendre.leggauss(nodes)

    def inner(j: int, hi: float) -> complex:
        if j == len(omegas):
            return 1.0
        s = 0.5 * hi * (x + 1)
        return sum(0.5 * hi * wi * np.exp(2j * np.pi * omegas[j] * si) * inner(j + 1, si) for si, wi in zip(s, w))

    return complex(inner(0, t))


def catalan3_direct(n: int) -> int:
    """Ternary trees with ``n`` branching nodes by the recursion ``T(n) = sum T(a) T(b) T(c)``."""
    T = [1]
    for k in range(1, n + 1):
        T.append(sum(T[a] * T[b] * T[k - 1 - a - b] for a in range(k) for b in range(k - a)))
    return T[n]


def wick_power(g: complex, p: int, q: int) -> complex:
    """``:g^p conj(g)^q:`` from the generating function ``exp(a g + b conj(g) - a b)``."""
    total = 0j
    for j in range(min(p, q) + 1):
        total += (-1) ** j * math.comb(p, j) * math.comb(q, j) * math.factorial(j) * g ** (p - j) * np.conj(g) ** (q - j)
    return total


def order_one_amplitude(sample: np.ndarray, modes_int: np.ndarray, k_int, L: float, t: float, lam: float,
                        psi, pol: complex) -> complex:
    """Order-one chaos amplitude of one sample by explicit loops and ``scipy.integrate.quad`` in time.

    Leaves ``k1, k2, k3`` carry signs ``+, -, +`` and ``k1 - k2 + k3 = k``.
    """
    from scipy import integrate

    index = {tuple(m): i for i, m in enumerate(modes_int)}
    k = np.asarray(k_int)
    total = 0j
    cache: dict[int, complex] = {}
    for k1 in modes_int:
        for k3 in modes_int:
            k2 = k1 + k3 - k
            i2 = index.get(tuple(k2))
            if i2 is None:
                continue
            i1, i3 = index[tuple(k1)], index[tuple(k3)]
            om_int = int(k @ k - k1 @ k1 + k2 @ k2 - k3 @ k3)  # 2 L^2 Omega
            if om_int not in cache:
                w = om_int / (2 * L * L)
                re = integrate.quad(lambda s: math.cos(2 * math.pi * w * s), 0, t, epsabs=1e-13)[0]
                im = integrate.quad(lambda s: math.sin(2 * math.pi * w * s), 0, t, epsabs=1e-13)[0]
                cache[om_int] = complex(re, im)
            counts: dict[int, list[int]] = {}
            for idx, sgn in ((i1, 1), (i2, -1), (i3, 1)):
                counts.setdefault(idx, [0, 0])[0 if sgn > 0 else 1] += 1
            wick = 1 + 0j
            for idx, (p, q) in counts.items():
                wick *= wick_power(sample[idx], p, q)
            weight = psi(k1 / L) * np.conj(psi(k2 / L)) * psi(k3 / L)
            total += cache[om_int] * weight * wick
    return pol * lam / L**3 * total
