"""Spherical harmonic and spherical polar Fourier transforms.

Angular coefficients are flat arrays over even degrees ``l < L`` ordered as
:func:`spfq.math_core.even_sh_indices`.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as la

from .math_core import (even_sh_indices, n_even_coeffs, normalized_legendre,
                        radial_matrix, sh_matrix, cart_to_sph)


class TransformError(RuntimeError):
    pass


# -- per-shell SHT ----------------------------------------------------------


@lru_cache(maxsize=64)
def _dense_plan(grid):
    A = sh_matrix(grid.band_limit, *grid.angles())
    return A, la.lu_factor(A)


def dense_forward_sht(grid, samples, factorize=False):
    """Solve the square SH system directly.

    ``factorize=True`` rebuilds the matrix and its LU factors on every call
    (the cost a generic least-squares fit pays per dataset).
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] != grid.n_points:
        raise ValueError(f"expected {grid.n_points} samples, got {samples.shape[0]}")
    if factorize:
        A = sh_matrix(grid.band_limit, *grid.angles())
        lu = la.lu_factor(A)
    else:
        _, lu = _dense_plan(grid)
    return la.lu_solve(lu, samples)


@dataclass(frozen=True)
class RingPlan:
    """Precomputed pieces of the ring-peeling transform for one grid."""

    L: int
    legendre: np.ndarray      # (J+1, lmax+1, lmax+1) normalised P_l^m at ring colatitudes
    solvers: dict             # m -> (degrees, LU of per-order system over rings k >= ceil(m/2))
    col: dict                 # (l, m) -> flat coefficient index


def _order_level(m):
    # ring k resolves |m| <= 2k, so order m first appears on ring ceil(m / 2)
    return (m + 1) // 2


def build_ring_plan(grid):
    L = grid.band_limit
    J = (L - 1) // 2
    lmax = max(L - 1, 0)
    P = np.moveaxis(normalized_legendre(lmax, np.cos(np.array(grid.thetas))), -1, 0)
    solvers = {}
    for m in range(0, lmax + 1):
        j = _order_level(m)
        degrees = [l for l in range(0, L, 2) if l >= m]
        rings = range(j, J + 1)
        scale = 1.0 if m == 0 else math.sqrt(2.0)
        M = np.array([[scale * P[k, l, m] for l in degrees] for k in rings])
        solvers[m] = (degrees, la.lu_factor(M))
    col = {lm: i for i, lm in enumerate(even_sh_indices(L))}
    return RingPlan(L, P, solvers, col)


_ring_plan_cached = lru_cache(maxsize=64)(build_ring_plan)


def _ring_fourier(values, offset, mmax):
    """Cosine/sine amplitudes of orders 0..mmax on an equispaced ring."""
    c = len(values)
    F = np.fft.rfft(values)[: mmax + 1] * np.exp(-1j * np.arange(mmax + 1) * offset)
    A = 2.0 * F.real / c
    B = -2.0 * F.imag / c
    A[0] *= 0.5
    return A, B


def ring_forward_sht(grid, samples, plan=None):
    """Ring-peeling forward SHT.

    Orders are resolved from the highest down. Before ring ``k`` is Fourier
    analysed, every already known order above ``2k`` (which would alias on
    its ``4k+1`` samples) is subtracted from it.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] != grid.n_points:
        raise ValueError(f"expected {grid.n_points} samples, got {samples.shape[0]}")
    plan = plan or _ring_plan_cached(grid)
    L = grid.band_limit
    J = (L - 1) // 2
    lmax = max(L - 1, 0)
    P = plan.legendre
    slices = grid.ring_slices()
    coeffs = np.zeros(n_even_coeffs(L))
    cosA = {}
    sinB = {}
    sqrt2 = math.sqrt(2.0)

    for j in range(J, -1, -1):
        # Fourier-analyse ring j after removing orders > 2j
        t_off = grid.offsets[j]
        c = 4 * j + 1
        phi = t_off + 2.0 * np.pi * np.arange(c) / c
        resid = samples[slices[j]].copy()
        high = range(2 * j + 1, lmax + 1)
        if len(high):
            ms = np.array(high)
            Acos = np.zeros(len(ms))
            Bsin = np.zeros(len(ms))
            for i, m in enumerate(ms):
                for l in range(m + (m % 2), L, 2):
                    Acos[i] += coeffs[plan.col[(l, m)]] * sqrt2 * P[j, l, m]
                    Bsin[i] += coeffs[plan.col[(l, -m)]] * sqrt2 * P[j, l, m]
            resid -= np.cos(np.outer(phi, ms)) @ Acos + np.sin(np.outer(phi, ms)) @ Bsin
        A, B = _ring_fourier(resid, t_off, 2 * j)
        for m in range(0, 2 * j + 1):
            cosA[(j, m)] = A[m]
            sinB[(j, m)] = B[m]

        # orders first visible on ring j can now be solved over rings j..J
        for m in range(max(2 * j - 1, 0), min(2 * j, lmax) + 1):
            degrees, lu = plan.solvers[m]
            a = la.lu_solve(lu, np.array([cosA[(k, m)] for k in range(j, J + 1)]))
            for l, v in zip(degrees, a):
                coeffs[plan.col[(l, m)]] = v
            if m > 0:
                b = la.lu_solve(lu, np.array([sinB[(k, m)] for k in range(j, J + 1)]))
                for l, v in zip(degrees, b):
                    coeffs[plan.col[(l, -m)]] = v
    return coeffs


def forward_sht(grid, samples, method="ring"):
    """Even-degree SH coefficients of ``samples`` on ``grid``."""
    if method == "ring":
        return ring_forward_sht(grid, samples)
    if method == "dense":
        return dense_forward_sht(grid, samples)
    raise ValueError(f"unknown method {method!r}")


def inverse_sht(grid, coeffs):
    """Evaluate even-degree SH coefficients at the grid points."""
    coeffs = np.asarray(coeffs, dtype=float)
    L = grid.band_limit
    n = n_even_coeffs(L)
    if coeffs.shape[0] > n:
        raise ValueError(f"coefficients exceed grid band-limit {L}")
    A, _ = _dense_plan(grid)
    return A[:, : coeffs.shape[0]] @ coeffs


# -- SPF ---------------------------------------------------------------------


@dataclass(frozen=True)
class SpfCoefficients:
    """SPF coefficients ``values[n, i]`` with ``i`` indexing even ``(l, m)``, ``l < L``."""

    N: int
    L: int
    zeta: float
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.N, n_even_coeffs(self.L)):
            raise ValueError(f"values shape {self.values.shape} does not match N={self.N}, L={self.L}")

    @property
    def indices(self):
        return [(n, l, m) for n in range(self.N) for l, m in even_sh_indices(self.L)]

    def __getitem__(self, nlm):
        n, l, m = nlm
        return self.values[n, even_sh_indices(self.L).index((l, m))]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "l", "m", "value"])
        for (n, l, m), v in zip(self.indices, self.values.ravel()):
            w.writerow([n, l, m, repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, zeta):
        rows = list(csv.DictReader(io.StringIO(text)))
        N = max(int(r["n"]) for r in rows) + 1
        L = max(int(r["l"]) for r in rows) + 1
        L += 1 - L % 2
        vals = np.zeros((N, n_even_coeffs(L)))
        idx = {lm: i for i, lm in enumerate(even_sh_indices(L))}
        for r in rows:
            vals[int(r["n"]), idx[(int(r["l"]), int(r["m"]))]] = float(r["value"])
        return cls(N, L, zeta, vals)


def spf_forward(scheme, samples, method="ring"):
    """SPF coefficients by radial Gauss-Laguerre quadrature of per-shell SHTs.

    Shell ``i`` contributes only to degrees below its own band-limit.
    """
    if len(samples) != scheme.N:
        raise ValueError(f"expected {scheme.N} shells of samples, got {len(samples)}")
    L = scheme.L
    R = radial_matrix(scheme.N, scheme.q_radii, scheme.zeta)  # (n, shell)
    values = np.zeros((scheme.N, n_even_coeffs(L)))
    for i, (shell, s) in enumerate(zip(scheme.shells, samples)):
        s = np.asarray(s, dtype=float)
        if s.shape[0] != shell.grid.n_points:
            raise ValueError(f"shell {i}: expected {shell.grid.n_points} samples, got {s.shape[0]}")
        a = forward_sht(shell.grid, s, method=method)
        values[:, : a.shape[0]] += shell.weight * np.outer(R[:, i], a)
    return SpfCoefficients(scheme.N, L, scheme.zeta, values)


def spf_basis(N, L, zeta, q, directions):
    """SPF design matrix, shape ``(n_points, N * n_even_coeffs(L))``, n-major."""
    q = np.asarray(q, dtype=float)
    theta, phi = cart_to_sph(directions)
    Y = sh_matrix(L, theta, phi)
    R = radial_matrix(N, q, zeta).T
    return (R[:, :, None] * Y[:, None, :]).reshape(len(q), -1)


def spf_synthesize(coeffs, q, directions, chunk=4096):
    """Evaluate the SPF expansion at radii ``q`` along unit ``directions``."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    out = np.empty(len(q))
    flat = coeffs.values.ravel()
    for s in range(0, len(q), chunk):
        sl = slice(s, s + chunk)
        out[sl] = spf_basis(coeffs.N, coeffs.L, coeffs.zeta, q[sl], directions[sl]) @ flat
    return out


# -- regularised least squares baseline --------------------------------------


@dataclass(frozen=True)
class LsDiagnostics:
    condition: float
    regularized_condition: float
    rank: int
    residual_norm: float


def penalty_diagonal(N, L, lambda_l, lambda_n, even_only=True):
    """Diagonal penalty lambda_l * l^2 (l+1)^2 + lambda_n * n^2 (n+1)^2."""
    degrees = range(0, L, 2) if even_only else range(0, L)
    ls = np.array([l for l in degrees for _ in range(2 * l + 1)], dtype=float)
    ns = np.arange(N, dtype=float)
    ang = (ls * (ls + 1)) ** 2
    rad = (ns * (ns + 1)) ** 2
    return (lambda_l * ang[None, :] + lambda_n * rad[:, None]).ravel()


def regularized_ls_fit(scheme, samples, N, L, zeta, lambda_l=1e-7, lambda_n=5e-8,
                       even_only=True, penalty_units="scheme", return_diagnostics=False):
    """Penalised least-squares SPF fit on arbitrary (e.g. gEEM) samples.

    Minimises ``||A c - s||^2 + c^T diag(p) c`` by an SVD solve of the stacked
    system ``[A; sqrt(p)]``, reporting the condition numbers involved.

    ``penalty_units="scheme"`` applies the lambdas to coefficients of the
    basis in scheme q-units. ``"dimensionless"`` applies them in the basis
    with q measured in units of sqrt(zeta), which scales the penalty by
    zeta**-1.5 since R_n carries a zeta**-0.75 factor.
    """
    q = np.concatenate([np.full(len(d), qr) for qr, d in zip(scheme.q_radii, scheme.directions)])
    dirs = np.concatenate(scheme.directions)
    s = np.concatenate([np.asarray(x, dtype=float) for x in samples])
    if s.shape[0] != len(q):
        raise ValueError(f"expected {len(q)} samples, got {s.shape[0]}")
    if even_only:
        A = spf_basis(N, L, zeta, q, dirs)
    else:
        theta, phi = cart_to_sph(dirs)
        Y = sh_matrix(L, theta, phi, even_only=False)
        R = radial_matrix(N, q, zeta).T
        A = (R[:, :, None] * Y[:, None, :]).reshape(len(q), -1)
    p = penalty_diagonal(N, L, lambda_l, lambda_n, even_only)
    if penalty_units == "dimensionless":
        p = p * zeta**-1.5
    elif penalty_units != "scheme":
        raise ValueError(f"unknown penalty units {penalty_units!r}")
    M = np.vstack([A, np.diag(np.sqrt(p))])
    rhs = np.concatenate([s, np.zeros(len(p))])
    sol, _, rank, sv = la.lstsq(M, rhs, lapack_driver="gelsd")
    if sv[-1] <= sv[0] * np.finfo(float).eps * max(M.shape):
        raise TransformError("regularised normal equations are numerically singular")
    if not even_only:
        # odd-degree columns are fitted but not stored
        keep = np.concatenate([np.arange(l * l, (l + 1) ** 2) for l in range(0, L, 2)])
        sol = sol.reshape(N, -1)[:, keep].ravel()
    coeffs = SpfCoefficients(N, L, zeta, sol.reshape(N, -1))
    if return_diagnostics:
        svA = np.linalg.svd(A, compute_uv=False)
        cond_A = svA[0] / svA[-1] if len(svA) >= A.shape[1] and svA[-1] > 0 else np.inf
        diag = LsDiagnostics(float(cond_A), float(sv[0] / sv[-1]), int(rank),
                             float(np.linalg.norm(A @ sol - s) if even_only else np.nan))
        return coeffs, diag
    return coeffs
