"""Multi-shell q-space sampling: the quadrature scheme and the gEEM baseline.

q-space units are chosen so that ``b = q**2`` (diffusion time absorbed into
the scale factor), hence ``zeta`` has units of s/mm^2.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from .math_core import laguerre_roots, radial_weights, sh_matrix, sph_to_cart

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


class GridDesignError(RuntimeError):
    pass


@dataclass(frozen=True)
class ThetaPolicy:
    """Controls colatitude placement of the iso-latitude rings.

    Rings start at ``theta_k = k * pi / (L + 1/2)`` (one sample at the pole).
    If the even-degree SH matrix is worse conditioned than ``cond_bound`` the
    ring colatitudes are reshaped by a two-parameter search (top ring
    colatitude and a quadratic stretch) with at most ``max_evals`` condition
    number evaluations.
    """

    cond_bound: float = 100.0
    max_evals: int = 200
    stagger: bool = True


@dataclass(frozen=True)
class ShellGrid:
    """Iso-latitude sampling of one shell at odd band-limit ``L``.

    Ring ``k`` holds ``4k + 1`` equispaced samples, so it resolves longitudinal
    orders ``|m| <= 2k`` exactly.
    """

    band_limit: int
    thetas: tuple
    offsets: tuple
    condition: float

    @property
    def counts(self):
        return tuple(4 * k + 1 for k in range(len(self.thetas)))

    @property
    def rings(self):
        return list(zip(self.thetas, self.counts, self.offsets))

    @property
    def n_points(self):
        return self.band_limit * (self.band_limit + 1) // 2

    def angles(self):
        theta, phi = [], []
        for t, c, p0 in self.rings:
            theta.append(np.full(c, t))
            phi.append(p0 + 2.0 * np.pi * np.arange(c) / c)
        return np.concatenate(theta), np.concatenate(phi)

    @property
    def points(self):
        return sph_to_cart(*self.angles())

    def ring_slices(self):
        start = 0
        out = []
        for c in self.counts:
            out.append(slice(start, start + c))
            start += c
        return out


def _ring_offsets(n_rings, stagger):
    if not stagger:
        return tuple(0.0 for _ in range(n_rings))
    return tuple(float((k * GOLDEN_ANGLE) % (2.0 * np.pi / (4 * k + 1))) for k in range(n_rings))


def _ring_thetas(n_rings, top, stretch):
    J = n_rings - 1
    if J == 0:
        return np.zeros(1)
    u = np.arange(n_rings) / J
    return top * ((1.0 - stretch) * u + stretch * u * u)


def _condition(L, thetas, offsets):
    th, ph = [], []
    for k, (t, p0) in enumerate(zip(thetas, offsets)):
        c = 4 * k + 1
        th.append(np.full(c, t))
        ph.append(p0 + 2.0 * np.pi * np.arange(c) / c)
    A = sh_matrix(L, np.concatenate(th), np.concatenate(ph))
    return float(np.linalg.cond(A))


@lru_cache(maxsize=64)
def design_shell_grid(L, theta_policy=ThetaPolicy()):
    """Design the ``L(L+1)/2``-point antipodal grid for odd band-limit ``L``."""
    if L % 2 != 1 or not 1 <= L <= 31:
        raise ValueError(f"L must be odd in [1, 31], got {L}")
    n_rings = (L + 1) // 2
    J = n_rings - 1
    offsets = _ring_offsets(n_rings, theta_policy.stagger)
    top0 = J * np.pi / (L + 0.5)
    thetas = _ring_thetas(n_rings, top0, 0.0)
    cond = _condition(L, thetas, offsets)
    if cond > theta_policy.cond_bound:
        thetas, cond = _search_thetas(L, offsets, top0, theta_policy)
    return ShellGrid(L, tuple(float(t) for t in thetas), offsets, cond)


def _search_thetas(L, offsets, top0, policy):
    n_rings = (L + 1) // 2
    evals = 0
    best = (np.inf, None)

    def logcond(x):
        nonlocal evals, best
        top, stretch = x
        if not (0.0 < top < np.pi / 2 and -0.5 < stretch < 0.9):
            return np.inf
        evals += 1
        th = _ring_thetas(n_rings, top, stretch)
        c = _condition(L, th, offsets)
        if c < best[0]:
            best = (c, th)
        return math.log(c)

    # coarse scan of the valley, then simplex refinement
    tops = np.linspace(top0, np.pi / 2 - 0.25 * np.pi / (L + 0.5), 6)
    stretches = np.linspace(0.0, 0.35, 8)
    scan = [(logcond((t, s)), t, s) for t in tops for s in stretches]
    _, t, s = min(scan)
    budget = max(policy.max_evals - evals, 0)
    if best[0] > policy.cond_bound and budget:
        minimize(logcond, [t, s], method="Nelder-Mead",
                 options=dict(maxfev=budget, xatol=1e-5, fatol=1e-4))
    if best[0] > policy.cond_bound:
        raise GridDesignError(
            f"no ring placement for L={L} met condition bound {policy.cond_bound} "
            f"(best {best[0]:.3g} after {evals} evaluations)")
    return best[1], best[0]


@dataclass(frozen=True)
class Shell:
    b: float
    q: float
    weight: float
    grid: ShellGrid


@dataclass(frozen=True)
class MultiShellScheme:
    zeta: float
    shells: tuple

    @property
    def total_samples(self):
        return sum(s.grid.n_points for s in self.shells)

    @property
    def band_limits(self):
        return tuple(s.grid.band_limit for s in self.shells)

    @property
    def N(self):
        return len(self.shells)

    @property
    def L(self):
        return max(self.band_limits)

    @property
    def q_radii(self):
        return np.array([s.q for s in self.shells])

    @property
    def weights(self):
        return np.array([s.weight for s in self.shells])

    def directions(self):
        return [s.grid.points for s in self.shells]

    def b_values(self):
        return [np.full(s.grid.n_points, s.b) for s in self.shells]


def design_scheme(b_max, N, per_shell_L, theta_policy=ThetaPolicy()):
    """Place ``N`` shells at Gauss-Laguerre radii with the outermost at ``b_max``."""
    per_shell_L = tuple(int(L) for L in per_shell_L)
    if len(per_shell_L) != N:
        raise ValueError("need one band-limit per shell")
    if any(L % 2 == 0 for L in per_shell_L) or list(per_shell_L) != sorted(per_shell_L):
        raise ValueError("per-shell band-limits must be odd and nondecreasing")
    x = laguerre_roots(N)
    zeta = b_max / x[-1]
    quad = radial_weights(N, zeta)
    shells = []
    for i, L in enumerate(per_shell_L):
        b = b_max * x[i] / x[-1]
        shells.append(Shell(float(b), float(quad.q_radii[i]), float(quad.weights[i]),
                            design_shell_grid(L, theta_policy)))
    return MultiShellScheme(float(zeta), tuple(shells))


# -- gEEM baseline ----------------------------------------------------------


@dataclass(frozen=True)
class GeemScheme:
    q_radii: tuple
    directions: tuple
    energy: float
    alpha: float
    seed: int
    iteration_log: tuple = field(repr=False, default=())

    @property
    def counts(self):
        return tuple(len(d) for d in self.directions)

    @property
    def total_samples(self):
        return sum(self.counts)

    def b_values(self):
        return [np.full(len(d), q * q) for q, d in zip(self.q_radii, self.directions)]


def _antipodal_energy_and_grad(u):
    """Coulomb energy of ``u`` together with its antipodes, and its gradient."""
    diff = u[:, None, :] - u[None, :, :]
    summ = u[:, None, :] + u[None, :, :]
    dm = np.linalg.norm(diff, axis=-1)
    dp = np.linalg.norm(summ, axis=-1)
    n = len(u)
    iu = np.triu_indices(n, 1)
    energy = np.sum(1.0 / dm[iu]) + np.sum(1.0 / dp[iu])
    np.fill_diagonal(dm, np.inf)
    # self-pair with own antipode has constant distance 2
    dp_off = dp.copy()
    np.fill_diagonal(dp_off, np.inf)
    grad = -np.sum(diff / dm[..., None] ** 3, axis=1) - np.sum(summ / dp_off[..., None] ** 3, axis=1)
    return energy, grad


def geem_energy(directions, alpha, with_grad=False):
    """Combined cost: per-shell energies weighted by ``alpha``, all-shell projection by ``1 - alpha``."""
    allpts = np.concatenate(directions)
    e_all, g_all = _antipodal_energy_and_grad(allpts)
    e_shell = 0.0
    g_shell = np.zeros_like(allpts)
    start = 0
    for d in directions:
        e, g = _antipodal_energy_and_grad(d)
        e_shell += e
        g_shell[start:start + len(d)] = g
        start += len(d)
    energy = alpha * e_shell + (1.0 - alpha) * e_all
    if with_grad:
        return energy, alpha * g_shell + (1.0 - alpha) * g_all
    return energy


def _split(points, counts):
    return np.split(points, np.cumsum(counts)[:-1])


def generate_geem(point_counts, q_radii, alpha=0.5, seed=0, iters=10000, tol=1e-12):
    """Electrostatic repulsion point sets for a multi-shell baseline.

    Projected gradient descent on the sphere; a step is accepted only if it
    lowers the energy, otherwise the step length is halved.
    """
    counts = [int(c) for c in point_counts]
    if len(counts) != len(q_radii):
        raise ValueError("one point count per shell radius")
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((sum(counts), 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    energy, grad = geem_energy(_split(u, counts), alpha, with_grad=True)
    log = [energy]
    step = 1e-2 / max(sum(counts), 1)
    for _ in range(iters):
        g_tan = grad - np.sum(grad * u, axis=1, keepdims=True) * u
        while True:
            trial = u - step * g_tan
            trial /= np.linalg.norm(trial, axis=1, keepdims=True)
            e_trial, g_trial = geem_energy(_split(trial, counts), alpha, with_grad=True)
            if e_trial < energy:
                break
            step *= 0.5
            if step < 1e-16:
                break
        if e_trial >= energy:
            break
        improvement = energy - e_trial
        u, energy, grad = trial, e_trial, g_trial
        log.append(energy)
        step *= 1.5
        if improvement < tol * energy:
            break
    return GeemScheme(
        q_radii=tuple(float(q) for q in q_radii),
        directions=tuple(_split(u, counts)),
        energy=float(energy),
        alpha=float(alpha),
        seed=int(seed),
        iteration_log=tuple(float(e) for e in log),
    )


def geem_for_scheme(scheme, alpha=0.5, seed=0, iters=10000):
    """Baseline matched to ``scheme``: same per-shell counts, radii evenly spaced in q."""
    q = np.linspace(scheme.shells[0].q, scheme.shells[-1].q, scheme.N)
    counts = [s.grid.n_points for s in scheme.shells]
    return generate_geem(counts, q, alpha=alpha, seed=seed, iters=iters)


# -- serialisation ----------------------------------------------------------


def _scheme_to_dict(scheme):
    if isinstance(scheme, MultiShellScheme):
        return {
            "kind": "spf",
            "zeta": scheme.zeta,
            "shells": [
                {
                    "b": s.b,
                    "q": s.q,
                    "weight": s.weight,
                    "L": s.grid.band_limit,
                    "thetas": list(s.grid.thetas),
                    "offsets": list(s.grid.offsets),
                    "condition": s.grid.condition,
                    "points": s.grid.points.tolist(),
                }
                for s in scheme.shells
            ],
        }
    if isinstance(scheme, GeemScheme):
        return {
            "kind": "geem",
            "zeta": None,
            "alpha": scheme.alpha,
            "seed": scheme.seed,
            "energy": scheme.energy,
            "shells": [
                {"b": q * q, "q": q, "weight": None, "L": None, "points": d.tolist()}
                for q, d in zip(scheme.q_radii, scheme.directions)
            ],
        }
    raise TypeError(f"cannot export {type(scheme).__name__}")


def export_scheme(scheme, fmt="json"):
    """Serialise a scheme to bytes: ``json``, ``bval`` or ``bvec``.

    bval/bvec follow the FSL layout: samples shell by shell, innermost first.
    """
    if fmt == "json":
        return json.dumps(_scheme_to_dict(scheme), indent=1).encode()
    if isinstance(scheme, MultiShellScheme):
        bvals = np.concatenate(scheme.b_values())
        dirs = np.concatenate(scheme.directions())
    else:
        bvals = np.concatenate(scheme.b_values())
        dirs = np.concatenate(scheme.directions)
    if fmt == "bval":
        return (" ".join(repr(float(b)) for b in bvals) + "\n").encode()
    if fmt == "bvec":
        rows = [" ".join(repr(float(v)) for v in dirs[:, i]) for i in range(3)]
        return ("\n".join(rows) + "\n").encode()
    raise ValueError(f"unsupported format {fmt!r}")


def import_scheme(data):
    """Inverse of ``export_scheme(..., 'json')``."""
    d = json.loads(data)
    if d["kind"] == "spf":
        shells = tuple(
            Shell(s["b"], s["q"], s["weight"],
                  ShellGrid(s["L"], tuple(s["thetas"]), tuple(s["offsets"]), s["condition"]))
            for s in d["shells"]
        )
        return MultiShellScheme(d["zeta"], shells)
    if d["kind"] == "geem":
        return GeemScheme(
            q_radii=tuple(s["q"] for s in d["shells"]),
            directions=tuple(np.array(s["points"], dtype=float).reshape(-1, 3) for s in d["shells"]),
            energy=d["energy"],
            alpha=d["alpha"],
            seed=d["seed"],
        )
    raise ValueError(f"unknown scheme kind {d['kind']!r}")
