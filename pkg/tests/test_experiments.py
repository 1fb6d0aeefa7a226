import csv
import json

import numpy as np
import pytest
from scipy import stats

from spfq import experiments as ex
from spfq.cli import main
from spfq.config import Config, ConfigError
from spfq.math_core import even_sh_indices, real_sph_harm, radial_function, cart_to_sph
from spfq.models import eval_signal_q, isotropic, random_rotation
from spfq.transforms import spf_synthesize


@pytest.fixture(scope="module")
def grid(scheme):
    return ex.evaluation_grid(scheme.shells[-1].q, 10000, seed=7)


@pytest.fixture(scope="module")
def one_fiber_fit(scheme, geem):
    from spfq.models import single_fiber
    cfg = Config()
    return single_fiber(), ex._fit(cfg, scheme, geem, single_fiber(), ex.PROPOSED)


# -- evaluation grid --------------------------------------------------------


def test_grid_invariants(scheme, grid):
    q_max = scheme.shells[-1].q
    assert len(grid) == 10000
    assert np.all(grid.q <= q_max)
    assert np.allclose(np.linalg.norm(grid.directions, axis=1), 1, atol=1e-14)
    again = ex.evaluation_grid(q_max, 10000, seed=7)
    assert np.array_equal(again.q, grid.q) and np.array_equal(again.directions, grid.directions)
    assert not np.array_equal(ex.evaluation_grid(q_max, 10000, seed=8).q, grid.q)


def test_grid_uniform_in_ball(scheme, grid):
    q_max = scheme.shells[-1].q
    # radial CDF of a uniform ball is (r / q_max)^3
    assert stats.kstest((grid.q / q_max) ** 3, "uniform").pvalue > 0.01
    assert np.linalg.norm(grid.directions.mean(axis=0)) < 0.02
    assert stats.kstest((grid.directions[:, 2] + 1) / 2, "uniform").pvalue > 0.01


# -- mean error -------------------------------------------------------------


def test_mean_error_exact_reconstruction(one_fiber_fit, grid):
    _, c = one_fiber_fit
    same = lambda qv: spf_synthesize(c, np.linalg.norm(qv, axis=1), qv / np.linalg.norm(qv, axis=1)[:, None])
    assert ex.mean_error(same, c, grid) < 1e-15


def test_mean_error_constant_offset(one_fiber_fit, grid):
    _, c = one_fiber_fit
    recon = spf_synthesize(c, grid.q, grid.directions)
    table = {tuple(v): r for v, r in zip(grid.qvecs, recon)}
    shifted = lambda qv: np.array([table[tuple(v)] + 0.01 for v in qv])
    assert abs(ex.mean_error(shifted, c, grid) - 0.01) < 1e-12


def test_mean_error_naive_oracle(one_fiber_fit, grid):
    model, c = one_fiber_fit
    sub = ex.EvaluationGrid(grid.q[:100], grid.directions[:100], grid.seed)
    total = 0.0
    for q, d in zip(sub.q, sub.directions):
        theta, phi = cart_to_sph(d[None])
        recon = 0.0
        for n in range(c.N):
            Rn = radial_function(n, q, c.zeta)
            for l, m in even_sh_indices(c.L):
                recon += c[n, l, m] * Rn * real_sph_harm(l, m, theta, phi)[0]
        total += abs(eval_signal_q(model, (q * d)[None])[0] - recon)
    assert abs(ex.mean_error(lambda qv: eval_signal_q(model, qv), c, sub) - total / 100) < 1e-14


# -- experiments ------------------------------------------------------------


def test_rotation_seeds_shared():
    cfg = Config()
    seeds = ex.rotation_seeds(cfg)
    assert len(seeds) == 30 and len(set(seeds)) == 30
    assert seeds == ex.rotation_seeds(cfg)


def test_isotropic_rotation_errors_identical(scheme, geem, grid):
    cfg = Config()
    base = isotropic(cfg.models.isotropic_diffusivity)
    for sch in (ex.PROPOSED, ex.GEEM):
        errs = []
        for seed in ex.rotation_seeds(cfg):
            m = base.rotated(random_rotation(seed))
            errs.append(ex.mean_error(lambda qv: eval_signal_q(m, qv), ex._fit(cfg, scheme, geem, m, sch), grid))
        assert np.ptp(errs) < 1e-12


def test_crossing_angles():
    assert ex.crossing_angles(Config()) == [30.0 + 5 * k for k in range(13)]


def test_reconstruction_report(scheme, geem):
    report = ex.run_reconstruction(Config())
    assert not report.failures
    assert {(r["model"], r["scheme"]) for r in report.rows} == {
        (m, s) for m, _ in ex.recon_models(Config()) for s in (ex.PROPOSED, ex.GEEM)}
    by = {(r["model"], r["scheme"]): r["E_mean"] for r in report.rows}
    assert by[("isotropic_control", ex.PROPOSED)] < 1e-4
    assert by[("isotropic_control", ex.GEEM)] < 1e-4
    for key, pinned in RECON_PINS.items():
        assert by[key] == pytest.approx(10 ** pinned, rel=1e-4), key
    assert report.to_json() == ex.run_reconstruction(Config()).to_json()
    d = json.loads(report.to_json())
    assert set(d["config"]) == {"scheme", "geem", "models", "odf", "experiment"}
    assert "timing" not in d


# log10 E_mean regression values from the first verified run (default config)
RECON_PINS = {
    ("one_fiber", "proposed"): -2.142246160008316,
    ("one_fiber", "geem"): -1.4208432989148367,
    ("two_fibers_90", "proposed"): -2.2537343435982646,
    ("two_fibers_90", "geem"): -1.5400221741879083,
    ("two_fibers_45", "proposed"): -2.2174745707245527,
    ("two_fibers_45", "geem"): -1.6390946765947036,
    ("isotropic_control", "proposed"): -6.0439494709063215,
    ("isotropic_control", "geem"): -4.20307509446943,
}


# -- config -----------------------------------------------------------------


def test_config_round_trip():
    cfg = Config().replace("geem", alpha=0.3)
    assert Config.from_json(json.dumps(cfg.to_dict())) == cfg


@pytest.mark.parametrize("patch", [
    {"scheme": {"band_limits": [3, 4, 9, 11]}},
    {"geem": {"alpha": 1.5}},
    {"odf": {"rel_threshold": 0.0}},
    {"bogus": {}},
    {"experiment": {"no_such_field": 1}},
])
def test_config_errors(patch):
    with pytest.raises(ConfigError):
        Config.from_dict(patch)


# -- CLI --------------------------------------------------------------------


def read_csv(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def test_cli_design(tmp_path):
    assert main(["--out", str(tmp_path), "design", "--bmax", "8000", "--shells", "4"]) == 0
    bvals = (tmp_path / "scheme.bval").read_text().split()
    assert len(bvals) == 132
    assert len((tmp_path / "scheme.bvec").read_text().splitlines()) == 3
    assert json.loads((tmp_path / "scheme.json").read_text())["kind"]


def test_cli_recon_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--out", str(a), "--seed", "7", "recon"]) == 0
    assert main(["--out", str(b), "--seed", "7", "recon"]) == 0
    for name in ("recon.csv", "recon.dat", "recon_report.json", "recon_config.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rows = read_csv(a / "recon.csv")
    assert list(rows[0]) == ["model", "scheme", "E_mean", "log10_E_mean"]


def test_cli_angular(tmp_path):
    assert main(["--out", str(tmp_path), "angular", "--step", "5"]) == 0
    rows = read_csv(tmp_path / "angular.csv")
    assert len(rows) == 26
    assert {r["scheme"] for r in rows} == {"proposed", "geem"}
    peaks = read_csv(tmp_path / "peaks.csv")
    assert list(peaks[0]) == ["model", "angle", "peak_x", "peak_y", "peak_z", "value"]


def test_cli_output_env(tmp_path, monkeypatch):
    monkeypatch.setenv("SPFQ_OUTPUT", str(tmp_path / "env"))
    assert main(["design"]) == 0
    assert (tmp_path / "env" / "scheme.bval").exists()


def test_cli_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"geem": {"alpha": -1}}))
    assert main(["--out", str(tmp_path), "--config", str(bad), "recon"]) == 1
    assert main(["--out", str(tmp_path), "--config", str(tmp_path / "missing.json"), "recon"]) == 1
    assert main(["--out", str(tmp_path), "design", "--shells", "3"]) == 1
    assert "configuration error" in capsys.readouterr().err


def test_cli_numerical_failure(tmp_path):
    cfg = tmp_path / "tight.json"
    cfg.write_text(json.dumps({"scheme": {"cond_bound": 1.01, "band_limits": [3, 5, 9, 31]}}))
    assert main(["--out", str(tmp_path), "--config", str(cfg), "design"]) == 2
