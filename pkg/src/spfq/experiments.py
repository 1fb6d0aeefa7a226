"""The three synthetic-data comparisons plus the SHT cost measurement.

Each ``run_*`` function returns an :class:`ExperimentReport` whose rows are
deterministic functions of the configuration; wall-clock time is kept apart
in ``timing`` so that serialised reports are byte-identical across reruns.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.stats import qmc

from . import models as mdl
from .config import Config
from .odf import (KernelSettings, angular_error, find_peaks, icosphere, odf_from_spf,
                  odf_kernel, truncation_radius)
from .sampling import ThetaPolicy, design_scheme, design_shell_grid, geem_for_scheme
from .transforms import (build_ring_plan, dense_forward_sht, regularized_ls_fit,
                         ring_forward_sht, spf_forward, spf_synthesize)

log = logging.getLogger(__name__)

PROPOSED = "proposed"
GEEM = "geem"


@dataclass(frozen=True)
class EvaluationGrid:
    """Points uniformly distributed in the ball of radius ``q_max``.

    Scrambled Halton points mapped to the ball (radius by inverse CDF of
    r^3, direction by equal-area cylindrical map).
    """

    q: np.ndarray
    directions: np.ndarray
    seed: int

    @property
    def qvecs(self):
        return self.q[:, None] * self.directions

    def __len__(self):
        return len(self.q)


def evaluation_grid(q_max, n=10000, seed=0):
    u = qmc.Halton(d=3, scramble=True, seed=seed).random(n)
    r = q_max * np.cbrt(u[:, 0])
    z = 1.0 - 2.0 * u[:, 1]
    phi = 2.0 * np.pi * u[:, 2]
    s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    dirs = np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
    return EvaluationGrid(r, dirs, seed)


def mean_error(truth_fn, coeffs, grid):
    """Mean absolute difference between ``truth_fn(qvecs)`` and the SPF reconstruction."""
    truth = truth_fn(grid.qvecs)
    recon = spf_synthesize(coeffs, grid.q, grid.directions)
    return float(np.mean(np.abs(truth - recon)))


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    rows: list
    summary: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    def to_csv(self, columns):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in self.rows:
            w.writerow([_fmt(row[c]) for c in columns])
        return buf.getvalue()

    def to_json(self):
        d = {k: getattr(self, k) for k in
             ("experiment", "config", "summary", "seeds", "metadata", "failures", "rows")}
        return json.dumps(d, indent=1, sort_keys=True, default=_jsonable)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(type(v))


# -- shared setup ------------------------------------------------------------


@lru_cache(maxsize=8)
def _schemes(cfg_scheme, cfg_geem):
    scheme = design_scheme(cfg_scheme.b_max, cfg_scheme.n_shells, cfg_scheme.band_limits,
                           ThetaPolicy(cond_bound=cfg_scheme.cond_bound))
    geem = geem_for_scheme(scheme, alpha=cfg_geem.alpha, seed=cfg_geem.seed, iters=cfg_geem.iters)
    return scheme, geem


def build_schemes(cfg):
    return _schemes(cfg.scheme, cfg.geem)


def _metadata(cfg, scheme, geem):
    return {
        "diffusivity_units": "mm^2/s; fibre eigenvalues 1.7e-3 and 0.2e-3",
        "q_units": "b = q^2 (s/mm^2); zeta in s/mm^2",
        "zeta": scheme.zeta,
        "shell_b_values": [s.b for s in scheme.shells],
        "shell_conditions": [s.grid.condition for s in scheme.shells],
        "total_samples": scheme.total_samples,
        "geem_q_radii": list(geem.q_radii),
        "geem_energy": geem.energy,
        "geem_iterations": len(geem.iteration_log) - 1,
        "geem_alpha": cfg.geem.alpha,
        "ls_penalty": "lambda_l l^2(l+1)^2 + lambda_n n^2(n+1)^2, diagonal",
        "ls_penalty_units": cfg.geem.penalty_units,
        "odf_variant": "r^2-weighted marginal ODF",
        "two_fiber_geometry": "fibre 1 along x, fibre 2 rotated about z; equal fractions",
    }


def _fit(cfg, scheme, geem, model, name):
    if name == PROPOSED:
        return spf_forward(scheme, mdl.sample_model(model, scheme), method=cfg.experiment.sht_method)
    g = cfg.geem
    return regularized_ls_fit(geem, mdl.sample_model(model, geem), scheme.N, scheme.L, scheme.zeta,
                              g.lambda_l, g.lambda_n, even_only=g.even_only,
                              penalty_units=g.penalty_units)


def _truth(model):
    return lambda qvecs: mdl.eval_signal_q(model, qvecs)


def _grid_for(cfg, scheme):
    return evaluation_grid(scheme.shells[-1].q, cfg.experiment.n_eval, cfg.experiment.seed)


def recon_models(cfg):
    m = cfg.models
    return [
        ("one_fiber", mdl.single_fiber(eigenvalues=m.eigenvalues)),
        ("two_fibers_90", mdl.crossing_fibers(90.0, m.eigenvalues, m.fractions)),
        ("two_fibers_45", mdl.crossing_fibers(45.0, m.eigenvalues, m.fractions)),
        ("isotropic_control", mdl.isotropic(m.isotropic_diffusivity)),
    ]


# -- experiments -------------------------------------------------------------


def run_reconstruction(cfg=Config()):
    """Mean reconstruction error of both schemes for each synthetic model."""
    t0 = time.perf_counter()
    scheme, geem = build_schemes(cfg)
    t_schemes = time.perf_counter() - t0
    grid = _grid_for(cfg, scheme)
    rows, failures = [], []
    for name, model in recon_models(cfg):
        for sch in (PROPOSED, GEEM):
            try:
                e = mean_error(_truth(model), _fit(cfg, scheme, geem, model, sch), grid)
            except (np.linalg.LinAlgError, RuntimeError) as exc:
                log.error("recon %s/%s failed: %s", name, sch, exc)
                failures.append({"model": name, "scheme": sch, "error": str(exc)})
                e = float("nan")
            rows.append({"model": name, "scheme": sch, "E_mean": e, "log10_E_mean": float(np.log10(e))})
    return ExperimentReport("recon", cfg.to_dict(), rows,
                            seeds={"evaluation_grid": cfg.experiment.seed, "geem": cfg.geem.seed},
                            metadata=_metadata(cfg, scheme, geem), failures=failures,
                            timing={"schemes_s": t_schemes, "total_s": time.perf_counter() - t0})


def rotation_seeds(cfg):
    return [cfg.experiment.seed * 1000 + k for k in range(cfg.experiment.n_rotations)]


def run_rotation(cfg=Config()):
    """Error of the single-fibre model under seeded random rotations."""
    t0 = time.perf_counter()
    scheme, geem = build_schemes(cfg)
    grid = _grid_for(cfg, scheme)
    base = mdl.single_fiber(eigenvalues=cfg.models.eigenvalues)
    rows, failures = [], []
    logs = {PROPOSED: [], GEEM: []}
    for seed in rotation_seeds(cfg):
        model = base.rotated(mdl.random_rotation(seed))
        for sch in (PROPOSED, GEEM):
            try:
                e = mean_error(_truth(model), _fit(cfg, scheme, geem, model, sch), grid)
                logs[sch].append(np.log10(e))
            except (np.linalg.LinAlgError, RuntimeError) as exc:
                failures.append({"seed": seed, "scheme": sch, "error": str(exc)})
                e = float("nan")
            rows.append({"seed": seed, "scheme": sch, "E_mean": e})
    summary = {sch: {"mean_log10_E_mean": float(np.mean(v)), "std_log10_E_mean": float(np.std(v))}
               for sch, v in logs.items() if v}
    return ExperimentReport("rotation", cfg.to_dict(), rows, summary=summary,
                            seeds={"rotations": rotation_seeds(cfg), "evaluation_grid": cfg.experiment.seed,
                                   "geem": cfg.geem.seed},
                            metadata=_metadata(cfg, scheme, geem), failures=failures,
                            timing={"total_s": time.perf_counter() - t0})


def crossing_angles(cfg):
    e = cfg.experiment
    n = int(round((e.angle_stop - e.angle_start) / e.angle_step)) + 1
    return [float(e.angle_start + k * e.angle_step) for k in range(n)]


@lru_cache(maxsize=8)
def _kernel(N, L, zeta, settings):
    return odf_kernel(N, L, zeta, settings)


def kernel_settings(cfg):
    o = cfg.odf
    return KernelSettings(r_max=o.kernel_r_max, decay=o.kernel_decay, panels=o.kernel_panels)


def run_angular(cfg=Config()):
    """Peak count and angular error of the kernel ODF over crossing angles."""
    t0 = time.perf_counter()
    scheme, geem = build_schemes(cfg)
    settings = kernel_settings(cfg)
    kernel = _kernel(scheme.N, scheme.L, scheme.zeta, settings)
    sphere = icosphere(cfg.odf.icosphere_level)
    rows, peaks_rows, failures = [], [], []
    for angle in crossing_angles(cfg):
        model = mdl.crossing_fibers(angle, cfg.models.eigenvalues, cfg.models.fractions)
        for sch in (PROPOSED, GEEM):
            try:
                odf = odf_from_spf(_fit(cfg, scheme, geem, model, sch), kernel)
                peaks = find_peaks(odf, sphere, cfg.odf.rel_threshold, cfg.odf.min_separation_deg)
                err, count = angular_error(peaks, model.axes)
            except (np.linalg.LinAlgError, RuntimeError) as exc:
                failures.append({"angle_deg": angle, "scheme": sch, "error": str(exc)})
                peaks, err, count = [], float("nan"), 0
            rows.append({"angle_deg": angle, "scheme": sch, "detected_count": count,
                         "mean_angular_error_deg": err})
            for p in peaks:
                peaks_rows.append({"model": sch, "angle": angle, "peak_x": p[0], "peak_y": p[1],
                                   "peak_z": p[2], "value": float(odf(p[None])[0])})
    meta = _metadata(cfg, scheme, geem)
    meta["kernel_r_max"] = truncation_radius(scheme.N, scheme.zeta, settings)
    meta["peak_rel_threshold"] = cfg.odf.rel_threshold
    meta["peak_min_separation_deg"] = cfg.odf.min_separation_deg
    report = ExperimentReport("angular", cfg.to_dict(), rows, seeds={"geem": cfg.geem.seed},
                              metadata=meta, failures=failures,
                              timing={"total_s": time.perf_counter() - t0})
    report.summary = {"peaks": peaks_rows}
    return report


def _best_time(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def run_bench_sht(band_limits=(7, 11, 15, 23, 31), repeats=5, seed=0):
    """Time the ring-peeling SHT (plan built per call) against a dense solve
    with per-call matrix assembly and LU factorisation; fit log-log slopes."""
    rng = np.random.default_rng(seed)
    rows = []
    times = {"ring": [], "dense": []}
    for L in band_limits:
        grid = design_shell_grid(L)
        s = rng.standard_normal(grid.n_points)
        tr = _best_time(lambda: ring_forward_sht(grid, s, plan=build_ring_plan(grid)), repeats)
        td = _best_time(lambda: dense_forward_sht(grid, s, factorize=True), repeats)
        times["ring"].append(tr)
        times["dense"].append(td)
        rows += [{"L": L, "method": "ring", "seconds": tr}, {"L": L, "method": "dense", "seconds": td}]
    lx = np.log(np.asarray(band_limits, dtype=float))
    slopes = {k: float(np.polyfit(lx, np.log(v), 1)[0]) for k, v in times.items()}
    return ExperimentReport("bench-sht", {"band_limits": list(band_limits), "repeats": repeats}, rows,
                            summary={"loglog_slope": slopes})
