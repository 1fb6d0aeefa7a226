"""Command line entry point: ``spfq design|geem|recon|rotation|angular|bench-sht``.

Exit codes: 0 ok, 1 configuration error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .config import Config, ConfigError
from .sampling import GridDesignError, ThetaPolicy, design_scheme, export_scheme, geem_for_scheme

OUTPUT_ENV = "SPFQ_OUTPUT"
DEFAULT_BAND_LIMITS = {4: (3, 5, 9, 11)}

log = logging.getLogger("spfq")


def _write(outdir, name, data):
    path = outdir / name
    path.write_bytes(data if isinstance(data, bytes) else data.encode())
    log.info("wrote %s", path)
    return path


def _dat(header, columns):
    lines = ["# " + " ".join(header)]
    for row in zip(*columns):
        lines.append(" ".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _load_config(args):
    cfg = Config()
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        cfg = Config.from_json(text)
    if args.seed is not None:
        cfg = cfg.replace("experiment", seed=args.seed)
    return cfg


def _scheme_from_args(args, cfg):
    if args.band_limits:
        band_limits = tuple(int(x) for x in args.band_limits.split(","))
    elif args.shells is not None:
        if args.shells not in DEFAULT_BAND_LIMITS:
            raise ConfigError(f"--band-limits required for --shells {args.shells}")
        band_limits = DEFAULT_BAND_LIMITS[args.shells]
    else:
        band_limits = cfg.scheme.band_limits
    if args.shells is not None and len(band_limits) != args.shells:
        raise ConfigError("--shells does not match the number of band-limits")
    b_max = args.bmax if args.bmax is not None else cfg.scheme.b_max
    cfg = cfg.replace("scheme", b_max=b_max, band_limits=band_limits)
    cfg.validate()
    return cfg


def cmd_design(args, cfg, outdir):
    cfg = _scheme_from_args(args, cfg)
    s = cfg.scheme
    scheme = design_scheme(s.b_max, s.n_shells, s.band_limits, ThetaPolicy(cond_bound=s.cond_bound))
    _write(outdir, "scheme.json", export_scheme(scheme, "json"))
    _write(outdir, "scheme.bval", export_scheme(scheme, "bval"))
    _write(outdir, "scheme.bvec", export_scheme(scheme, "bvec"))
    print(f"{scheme.total_samples} samples on {scheme.N} shells, b = "
          + ", ".join(f"{sh.b:.1f}" for sh in scheme.shells))


def cmd_geem(args, cfg, outdir):
    cfg = _scheme_from_args(args, cfg)
    s, g = cfg.scheme, cfg.geem
    scheme = design_scheme(s.b_max, s.n_shells, s.band_limits, ThetaPolicy(cond_bound=s.cond_bound))
    geem = geem_for_scheme(scheme, alpha=g.alpha, seed=g.seed, iters=g.iters)
    _write(outdir, "geem.json", export_scheme(geem, "json"))
    _write(outdir, "geem.bval", export_scheme(geem, "bval"))
    _write(outdir, "geem.bvec", export_scheme(geem, "bvec"))
    print(f"gEEM: {geem.total_samples} samples, energy {geem.energy:.6g} "
          f"after {len(geem.iteration_log) - 1} accepted steps")


def _finish(report, outdir):
    _write(outdir, f"{report.experiment}_report.json", report.to_json())
    _write(outdir, f"{report.experiment}_timing.json", json.dumps(report.timing, indent=1))
    if report.failures:
        for f in report.failures:
            log.error("failed case: %s", f)
        return 2
    return 0


def cmd_recon(args, cfg, outdir):
    report = ex.run_reconstruction(cfg)
    _write(outdir, "recon.csv", report.to_csv(["model", "scheme", "E_mean", "log10_E_mean"]))
    names = [r["model"] for r in report.rows if r["scheme"] == ex.PROPOSED]
    by = {(r["model"], r["scheme"]): r["log10_E_mean"] for r in report.rows}
    _write(outdir, "recon.dat", _dat(["index", "model", "log10_proposed", "log10_geem"],
                                     [range(len(names)), names,
                                      [by[(n, ex.PROPOSED)] for n in names],
                                      [by[(n, ex.GEEM)] for n in names]]))
    for n in names:
        print(f"{n:20s} proposed {by[(n, ex.PROPOSED)]:8.4f}  geem {by[(n, ex.GEEM)]:8.4f}  (log10 E_mean)")
    return _finish(report, outdir)


def cmd_rotation(args, cfg, outdir):
    report = ex.run_rotation(cfg)
    _write(outdir, "rotation.csv", report.to_csv(["seed", "scheme", "E_mean"]))
    seeds = ex.rotation_seeds(cfg)
    by = {(r["seed"], r["scheme"]): r["E_mean"] for r in report.rows}
    _write(outdir, "rotation.dat", _dat(["seed", "log10_proposed", "log10_geem"],
                                        [seeds, [np.log10(by[(s, ex.PROPOSED)]) for s in seeds],
                                         [np.log10(by[(s, ex.GEEM)]) for s in seeds]]))
    for sch, v in report.summary.items():
        print(f"{sch:9s} log10 E_mean: mean {v['mean_log10_E_mean']:.4f}  std {v['std_log10_E_mean']:.4f}")
    return _finish(report, outdir)


def cmd_angular(args, cfg, outdir):
    if args.step is not None:
        cfg = cfg.replace("experiment", angle_step=args.step)
    report = ex.run_angular(cfg)
    _write(outdir, "angular.csv", report.to_csv(
        ["angle_deg", "scheme", "detected_count", "mean_angular_error_deg"]))
    peaks = ex.ExperimentReport("peaks", {}, report.summary["peaks"])
    _write(outdir, "peaks.csv", peaks.to_csv(["model", "angle", "peak_x", "peak_y", "peak_z", "value"]))
    angles = ex.crossing_angles(cfg)
    by = {(r["angle_deg"], r["scheme"]): r for r in report.rows}
    _write(outdir, "angular.dat", _dat(
        ["angle_deg", "err_proposed", "err_geem", "count_proposed", "count_geem"],
        [angles,
         [by[(a, ex.PROPOSED)]["mean_angular_error_deg"] for a in angles],
         [by[(a, ex.GEEM)]["mean_angular_error_deg"] for a in angles],
         [by[(a, ex.PROPOSED)]["detected_count"] for a in angles],
         [by[(a, ex.GEEM)]["detected_count"] for a in angles]]))
    for a in angles:
        p, g = by[(a, ex.PROPOSED)], by[(a, ex.GEEM)]
        print(f"{a:5.1f} deg  proposed {p['detected_count']} peaks {p['mean_angular_error_deg']:6.2f}  "
              f"geem {g['detected_count']} peaks {g['mean_angular_error_deg']:6.2f}")
    return _finish(report, outdir)


def cmd_bench(args, cfg, outdir):
    Ls = tuple(int(x) for x in args.band_limits.split(",")) if args.band_limits else (7, 11, 15, 23, 31)
    report = ex.run_bench_sht(Ls, repeats=args.repeats)
    _write(outdir, "bench_sht.csv", report.to_csv(["L", "method", "seconds"]))
    _write(outdir, "bench_sht_report.json", report.to_json())
    for k, v in report.summary["loglog_slope"].items():
        print(f"{k:6s} log-log slope {v:.3f}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="spfq", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON config with sections scheme/geem/models/odf/experiment")
    p.add_argument("--seed", type=int, help="experiment seed (evaluation grid, rotations)")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./results)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    for name, fn, helptext in (("design", cmd_design, "emit the proposed sampling scheme"),
                               ("geem", cmd_geem, "emit the gEEM baseline scheme")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--bmax", type=float)
        sp.add_argument("--shells", type=int)
        sp.add_argument("--band-limits", help="comma-separated odd per-shell band-limits")
        sp.set_defaults(func=fn)

    sub.add_parser("recon", help="reconstruction error per model").set_defaults(func=cmd_recon)
    sub.add_parser("rotation", help="error spread under random rotations").set_defaults(func=cmd_rotation)
    sp = sub.add_parser("angular", help="angular discrimination over crossing angles")
    sp.add_argument("--step", type=float)
    sp.set_defaults(func=cmd_angular)
    sp = sub.add_parser("bench-sht", help="SHT cost scaling")
    sp.add_argument("--band-limits")
    sp.add_argument("--repeats", type=int, default=5)
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    outdir = Path(args.out or os.environ.get(OUTPUT_ENV, "results"))
    try:
        cfg = _load_config(args)
        outdir.mkdir(parents=True, exist_ok=True)
        _write(outdir, f"{args.command}_config.json", json.dumps(cfg.to_dict(), indent=1, sort_keys=True))
        return args.func(args, cfg, outdir) or 0
    except (ConfigError, ValueError) as exc:
        print(f"spfq: configuration error: {exc}", file=sys.stderr)
        return 1
    except (GridDesignError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"spfq: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
