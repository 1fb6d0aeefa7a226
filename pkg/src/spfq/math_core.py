"""Special functions and radial quadrature for the spherical polar Fourier basis.

Conventions
-----------
* Generalised Laguerre polynomials are always of order one half.
* Real spherical harmonics use the cosine/sine combination without the
  Condon-Shortley phase::

      Y_l^m = sqrt(2) K_l^m P_l^m(cos t) cos(m p)       m > 0
      Y_l^0 = K_l^0 P_l(cos t)
      Y_l^m = sqrt(2) K_l^|m| P_l^|m|(cos t) sin(|m| p)  m < 0

  and are orthonormal over the unit sphere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

ALPHA = 0.5
LMAX = 64


def laguerre_half(n, x):
    """Evaluate L_n^{1/2}(x) with the three-term recurrence.

    ``x`` may be a scalar or an array; the result has the same shape.
    """
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + ALPHA - x
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 + ALPHA - x) * cur - (k + ALPHA) * prev) / (k + 1)
    return cur if cur.ndim else float(cur)


def _laguerre_half_and_derivative(n, x):
    # d/dx L_n^a = -L_{n-1}^{a+1} = (n L_n^a - (n + a) L_{n-1}^a) / x
    ln = laguerre_half(n, x)
    lm = laguerre_half(n - 1, x)
    return ln, (n * ln - (n + ALPHA) * lm) / x


class RootFindingError(RuntimeError):
    """Raised when Laguerre root refinement fails to converge."""


def _refine_root(n, lo, hi, max_iter=200):
    flo = laguerre_half(n, lo)
    fhi = laguerre_half(n, hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise RootFindingError(f"bracket [{lo}, {hi}] does not straddle a root of L_{n}")
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        f, df = _laguerre_half_and_derivative(n, x)
        if f == 0.0:
            return x
        if np.sign(f) == np.sign(flo):
            lo, flo = x, f
        else:
            hi = x
        step = f / df if df != 0.0 else np.inf
        xn = x - step
        if not lo < xn < hi:
            # Newton left the bracket, bisect instead
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= 4 * np.finfo(float).eps * max(1.0, abs(xn)):
            return xn
        x = xn
    raise RootFindingError(f"root of L_{n} in [{lo}, {hi}] did not converge")


@lru_cache(maxsize=None)
def _roots_cached(N):
    if N == 1:
        return (1.0 + ALPHA,)
    inner = _roots_cached(N - 1)
    # roots of L_N interlace those of L_{N-1}; all lie in (0, 2N + a + 1 + 2 sqrt(...))
    upper = 4.0 * N + 2.0 * ALPHA + 2.0
    edges = (0.0,) + inner + (upper,)
    tiny = 1e-300
    roots = [_refine_root(N, max(a, tiny), b) for a, b in zip(edges[:-1], edges[1:])]
    return tuple(roots)


def laguerre_roots(N):
    """Return the ``N`` roots of L_N^{1/2} in ascending order."""
    if not 1 <= N <= 32:
        raise ValueError(f"N must be in [1, 32], got {N}")
    return np.array(_roots_cached(N))


def radial_norm(n, zeta):
    """Normalisation constant of the Gaussian-Laguerre radial function R_n."""
    logc = math.log(2.0) - 1.5 * math.log(zeta) + math.lgamma(n + 1) - math.lgamma(n + 1.5)
    return math.exp(0.5 * logc)


def radial_function(n, q, zeta):
    """Gaussian-Laguerre radial function R_n(q), orthonormal under q^2 dq."""
    q = np.asarray(q, dtype=float)
    x = q * q / zeta
    return radial_norm(n, zeta) * np.exp(-0.5 * x) * laguerre_half(n, x)


def radial_matrix(N, q, zeta):
    """Stack R_0..R_{N-1} evaluated at ``q``; shape ``(N,) + q.shape``."""
    return np.stack([radial_function(n, q, zeta) for n in range(N)])


@dataclass(frozen=True)
class RadialQuadrature:
    """Shell placement and weights for exact radial SPF integration.

    ``weights`` integrate f(q) q^2 dq over [0, inf) exactly whenever f is a
    product of two radial functions of order below ``order``.
    """

    order: int
    zeta: float
    nodes: np.ndarray
    q_radii: np.ndarray
    weights: np.ndarray

    def integrate(self, values):
        return np.dot(self.weights, values)


def radial_weights(N, zeta):
    """Gauss-Laguerre shells at q_i = sqrt(zeta x_i) with their weights."""
    if not zeta > 0:
        raise ValueError("zeta must be positive")
    x = laguerre_roots(N)
    lnext = laguerre_half(N + 1, x)
    logw = (
        math.log(0.5)
        + 1.5 * math.log(zeta)
        + math.lgamma(N + 1.5)
        + np.log(x)
        + x
        - math.lgamma(N + 1)
        - 2.0 * math.log(N + 1)
        - 2.0 * np.log(np.abs(lnext))
    )
    w = np.exp(logw)
    q = np.sqrt(zeta * x)
    for arr in (x, q, w):
        arr.setflags(write=False)
    return RadialQuadrature(order=N, zeta=float(zeta), nodes=x, q_radii=q, weights=w)


# -- spherical harmonics ----------------------------------------------------


def sh_index(l, m):
    """Flat index of (l, m) in the full real SH ordering (l^2 + l + m)."""
    return l * l + l + m


def even_sh_indices(L):
    """List of (l, m) for even l < L, ordered by l then m."""
    return [(l, m) for l in range(0, L, 2) for m in range(-l, l + 1)]


def n_even_coeffs(L):
    return sum(2 * l + 1 for l in range(0, L, 2))


def normalized_legendre(lmax, x):
    """Fully normalised associated Legendre functions.

    Returns ``P`` with ``P[l, m]`` = K_l^m P_l^m(x) (no Condon-Shortley phase)
    where K_l^m = sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!), so that
    Y_l^0 = P[l, 0] and Y_l^{+-m} = sqrt(2) P[l, m] cos/sin(m p).
    Shape ``(lmax+1, lmax+1) + x.shape``.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    P = np.zeros((lmax + 1, lmax + 1) + x.shape)
    P[0, 0] = 1.0 / math.sqrt(4.0 * math.pi)
    for m in range(1, lmax + 1):
        P[m, m] = math.sqrt((2 * m + 1) / (2.0 * m)) * s * P[m - 1, m - 1]
    for m in range(0, lmax):
        P[m + 1, m] = math.sqrt(2 * m + 3) * x * P[m, m]
    for m in range(0, lmax + 1):
        for l in range(m + 2, lmax + 1):
            a = math.sqrt((4.0 * l * l - 1) / (l * l - m * m))
            b = math.sqrt(((l - 1) ** 2 - m * m) / (4.0 * (l - 1) ** 2 - 1))
            P[l, m] = a * (x * P[l - 1, m] - b * P[l - 2, m])
    return P


def real_sph_harm(l, m, theta, phi):
    """Real orthonormal spherical harmonic Y_l^m at colatitude ``theta``, longitude ``phi``."""
    if not 0 <= abs(m) <= l <= LMAX:
        raise ValueError(f"invalid degree/order ({l}, {m})")
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    P = normalized_legendre(l, np.cos(theta))[l, abs(m)]
    if m > 0:
        out = math.sqrt(2.0) * P * np.cos(m * phi)
    elif m < 0:
        out = math.sqrt(2.0) * P * np.sin(-m * phi)
    else:
        out = P * np.ones_like(phi)
    return out if np.ndim(out) else float(out)


def cart_to_sph(points):
    """Unit vectors (..., 3) to (theta, phi)."""
    points = np.asarray(points, dtype=float)
    r = np.linalg.norm(points, axis=-1)
    z = np.clip(points[..., 2] / np.where(r > 0, r, 1.0), -1.0, 1.0)
    return np.arccos(z), np.arctan2(points[..., 1], points[..., 0])


def sph_to_cart(theta, phi):
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def sh_matrix(L, theta, phi, even_only=True):
    """Design matrix of real SH up to degree ``L - 1`` at the given angles.

    Columns follow :func:`even_sh_indices` (or all degrees when
    ``even_only`` is False).
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    lmax = max(L - 1, 0)
    P = normalized_legendre(lmax, np.cos(theta))
    degrees = range(0, L, 2) if even_only else range(0, L)
    cols = []
    for l in degrees:
        for m in range(-l, l + 1):
            if m > 0:
                cols.append(math.sqrt(2.0) * P[l, m] * np.cos(m * phi))
            elif m < 0:
                cols.append(math.sqrt(2.0) * P[l, -m] * np.sin(-m * phi))
            else:
                cols.append(P[l, 0])
    return np.stack(cols, axis=-1)


# -- spherical Bessel -------------------------------------------------------


def sph_bessel(l, x):
    """Spherical Bessel function j_l(x) for ``x >= 0``.

    Upward recurrence where it is stable (x > l), Miller's downward
    recurrence normalised by j_0 elsewhere.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)

    zero = x == 0.0
    out[zero] = 1.0 if l == 0 else 0.0

    up = (x > l) & ~zero
    if up.any():
        xu = x[up]
        j0 = np.sin(xu) / xu
        if l == 0:
            out[up] = j0
        else:
            j1 = np.sin(xu) / xu**2 - np.cos(xu) / xu
            jm, jc = j0, j1
            for k in range(1, l):
                jm, jc = jc, (2 * k + 1) / xu * jc - jm
            out[up] = jc

    down = ~up & ~zero
    if down.any():
        xd = x[down]
        # start well above both l and x so the seed error has decayed
        start = l + 20 + int(math.sqrt(40.0 * (l + 20)))
        jp = np.zeros_like(xd)
        jc = np.full_like(xd, 1e-300)
        jl = None
        for k in range(start, 0, -1):
            jp, jc = jc, (2 * k + 1) / xd * jc - jp
            # rescale to keep the recurrence inside floating-point range
            big = np.abs(jc) > 1e250
            if big.any():
                jc[big] *= 1e-250
                jp[big] *= 1e-250
                if jl is not None:
                    jl[big] *= 1e-250
            if k - 1 == l:
                jl = jc.copy()
        if l == 0:
            jl = jc.copy()
        # jc, jp now hold the unnormalised j_0, j_1; normalise against the
        # larger of the two so zeros of j_0 do not hurt
        safe = np.where(xd > 0, xd, 1.0)
        small = xd < 1e-3
        j0 = np.where(small, 1.0 - xd**2 / 6.0, np.sin(xd) / safe)
        j1 = np.where(small, xd / 3.0 - xd**3 / 30.0, np.sin(xd) / safe**2 - np.cos(xd) / safe)
        scale = np.where(np.abs(j0) >= np.abs(j1), j0 / jc, j1 / jp)
        out[down] = jl * scale

    return float(out[0]) if scalar else out
