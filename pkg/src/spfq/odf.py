"""ODF from SPF coefficients, icosphere peak search and angular error.

The ODF is the r^2-weighted marginal of the propagator, with the Fourier
convention E(q) = int P(R) exp(-2 pi i q.R) dR. Because the SPF basis is
separable, ODF_lm = sum_n E_nlm o_nl with

    P_nl(r) = 4 pi i^l int_0^inf R_n(q) j_l(2 pi q r) q^2 dq
    o_nl    = int_0^r_max P_nl(r) r^2 dr

For l = 0 the integral converges and o_n0 = R_n(0) / (4 pi). For l > 0 the
propagator tail decays like r^-3 whenever the angular part of the signal
does not vanish at q = 0, so the outer integral is cut at ``r_max``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import linear_sum_assignment

from .math_core import (cart_to_sph, even_sh_indices, n_even_coeffs, radial_matrix,
                        sh_matrix, sph_bessel)


class KernelConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class KernelSettings:
    """Quadrature settings for :func:`odf_kernel`.

    ``r_max=None`` truncates where every l = 0 propagator component has
    fallen below ``decay`` times its peak.
    """

    r_max: float | None = None
    decay: float = 1e-10
    q_cut: float = 120.0       # integrate q up to sqrt(zeta * q_cut)
    panels: int = 24
    order: int = 32
    tol: float = 1e-8

    def digest(self):
        return hashlib.sha1(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:12]


def _composite_gauss(a, b, panels, order):
    x, w = leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + h[:, None] * (x + 1.0) / 2.0).ravel()
    weights = (h[:, None] * w / 2.0).ravel()
    return nodes, weights


def _propagator_l0(N, zeta, r, settings):
    q, wq = _composite_gauss(0.0, math.sqrt(zeta * settings.q_cut), settings.panels, settings.order)
    R = radial_matrix(N, q, zeta)
    J0 = sph_bessel(0, 2.0 * np.pi * np.outer(q, r))
    return 4.0 * np.pi * (R * q**2 * wq) @ J0


def truncation_radius(N, zeta, settings=KernelSettings()):
    """Radius beyond which all l = 0 propagator components are below ``decay`` of peak."""
    if settings.r_max is not None:
        return settings.r_max
    # propagator scale of the basis is 1 / (2 pi sqrt(zeta))
    scale = 1.0 / (2.0 * np.pi * math.sqrt(zeta))
    r = np.linspace(0.0, 20.0 * scale, 2001)
    P = np.abs(_propagator_l0(N, zeta, r, settings))
    peak = P.max(axis=1, keepdims=True)
    above = np.nonzero(np.any(P > settings.decay * peak, axis=0))[0]
    return float(r[min(above[-1] + 1, len(r) - 1)])


def _kernel_once(N, L, zeta, r_max, panels, settings):
    q, wq = _composite_gauss(0.0, math.sqrt(zeta * settings.q_cut), panels, settings.order)
    r, wr = _composite_gauss(0.0, r_max, panels, settings.order)
    Rq = radial_matrix(N, q, zeta) * q**2 * wq
    kq = 2.0 * np.pi * np.outer(q, r)
    out = np.zeros((N, (L + 1) // 2))
    for i, l in enumerate(range(0, L, 2)):
        inner = sph_bessel(l, kq) @ (r**2 * wr)
        out[:, i] = 4.0 * np.pi * (-1) ** (l // 2) * Rq @ inner
    return out


def odf_kernel(N, L, zeta, settings=KernelSettings(), cache_dir=None):
    """Matrix ``o[n, l // 2]`` mapping SPF coefficients to ODF SH coefficients.

    Nested composite Gauss-Legendre quadrature; the panel count is doubled
    once and the two results compared as the error estimate.
    """
    path = None
    if cache_dir is not None:
        key = f"odfkernel_N{N}_L{L}_z{zeta!r}_{settings.digest()}.json"
        path = Path(cache_dir) / key
        if path.exists():
            return np.array(json.loads(path.read_text())["kernel"])
    r_max = truncation_radius(N, zeta, settings)
    coarse = _kernel_once(N, L, zeta, r_max, settings.panels, settings)
    fine = _kernel_once(N, L, zeta, r_max, 2 * settings.panels, settings)
    err = np.max(np.abs(fine - coarse)) / np.max(np.abs(fine))
    if err > settings.tol:
        raise KernelConvergenceError(f"kernel step-doubling error {err:.3g} exceeds {settings.tol:.3g}")
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"N": N, "L": L, "zeta": zeta, "r_max": r_max,
                                    "settings": asdict(settings), "kernel": fine.tolist()}))
    return fine


@dataclass(frozen=True)
class OdfSH:
    """Even-degree real SH coefficients of an ODF."""

    L: int
    coeffs: np.ndarray
    normalized: bool = False

    @property
    def integral(self):
        return float(self.coeffs[0] * math.sqrt(4.0 * math.pi))

    def __call__(self, directions):
        theta, phi = cart_to_sph(np.atleast_2d(directions))
        return sh_matrix(self.L, theta, phi) @ self.coeffs

    def __add__(self, other):
        return OdfSH(self.L, self.coeffs + other.coeffs, self.normalized and other.normalized)


def odf_from_spf(coeffs, kernel, normalize=False):
    """Contract SPF coefficients with the ODF kernel over the radial index.

    With ``normalize=True`` the result is rescaled to unit mass, i.e. as if
    the fitted signal had E(0) = 1.
    """
    kernel = np.asarray(kernel)
    if kernel.shape != (coeffs.N, (coeffs.L + 1) // 2):
        raise ValueError(f"kernel shape {kernel.shape} does not match N={coeffs.N}, L={coeffs.L}")
    degree_col = np.array([l // 2 for l, _ in even_sh_indices(coeffs.L)])
    c = np.einsum("ni,ni->i", coeffs.values, kernel[:, degree_col])
    odf = OdfSH(coeffs.L, c)
    if normalize:
        odf = OdfSH(coeffs.L, c / odf.integral, True)
    return odf


# -- icosphere and peaks -----------------------------------------------------


@dataclass(frozen=True)
class Icosphere:
    level: int
    vertices: np.ndarray
    faces: np.ndarray
    neighbors: tuple

    def antipode_index(self):
        # vertex sets from the icosahedron are closed under negation
        order = {tuple(np.round(v, 9)): i for i, v in enumerate(self.vertices)}
        return np.array([order[tuple(np.round(-v, 9) + 0.0)] for v in self.vertices])


def icosphere(level=4):
    """Recursively subdivided icosahedron; level 4 has 2562 vertices."""
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(level):
        midpoint = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in midpoint:
                v = verts[a] + verts[b]
                verts.append(v / np.linalg.norm(v))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    V = np.array(verts)
    F = np.array(faces)
    nb = [set() for _ in range(len(V))]
    for a, b, c in F:
        nb[a] |= {b, c}
        nb[b] |= {a, c}
        nb[c] |= {a, b}
    return Icosphere(level, V, F, tuple(np.array(sorted(s)) for s in nb))


def find_peaks(odf, sphere, rel_threshold=0.5, min_separation_deg=10.0, tie_tol=1e-12):
    """Local maxima of ``odf`` over icosphere neighbourhoods.

    A vertex is a peak when it exceeds every neighbour; values equal within
    ``tie_tol * max`` (mirror-symmetric vertex pairs) are resolved in favour
    of the lower vertex index. Peaks below ``rel_threshold`` times the global
    maximum are dropped, and a peak within ``min_separation_deg`` of a
    stronger one (as axes, so antipodes included) is merged into it. A constant ODF has
    no peaks. Sorted by descending value.
    """
    if not 0.0 < rel_threshold < 1.0:
        raise ValueError("rel_threshold must be in (0, 1)")
    values = np.asarray(odf(sphere.vertices), dtype=float)
    vmax = values.max()
    tol = tie_tol * max(abs(vmax), np.finfo(float).tiny)
    if vmax - values.min() <= tol:
        return []
    peaks = []
    for i, nbrs in enumerate(sphere.neighbors):
        if values[i] < rel_threshold * vmax:
            continue
        d = values[i] - values[nbrs]
        if np.all((d > tol) | ((np.abs(d) <= tol) & (nbrs > i))):
            peaks.append(i)
    peaks.sort(key=lambda i: (-values[i], i))
    cos_sep = math.cos(math.radians(min_separation_deg))
    kept = []
    for i in peaks:
        v = sphere.vertices[i]
        if all(abs(v @ sphere.vertices[j]) < min(cos_sep, 1.0 - 1e-9) for j in kept):
            kept.append(i)
    return [sphere.vertices[i].copy() for i in kept]


def axis_angle_deg(u, v):
    """Angle between two axes (antipodally identified), in degrees."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    c = abs(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.degrees(np.arccos(min(c, 1.0))))


def angular_error(detected, truth):
    """Mean axis angle over an optimal one-to-one matching, and detected count."""
    if len(truth) == 0:
        raise ValueError("truth must be nonempty")
    if len(detected) == 0:
        return float("nan"), 0
    cost = np.array([[axis_angle_deg(d, t) for t in truth] for d in detected])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean()), len(detected)
