import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from spfq.models import (FIBER_EIGENVALUES, Compartment, GaussianMixtureModel, crossing_fibers,
                         eval_signal, eval_signal_q, ground_truth_odf, isotropic, random_rotation,
                         sample_model, single_fiber)

from conftest import unit_vectors

REFERENCE_MODELS = [single_fiber(), crossing_fibers(90), crossing_fibers(45)]


def fibonacci_sphere(n):
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    phi = math.pi * (1 + 5 ** 0.5) * i
    r = np.sqrt(1 - z * z)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def test_zero_b_gives_one(rng):
    d = unit_vectors(rng, 20)
    for m in REFERENCE_MODELS + [isotropic()]:
        assert np.allclose(eval_signal(m, 0.0, d), 1.0, atol=0)


def test_isotropic_signal(rng):
    d = unit_vectors(rng, 20)
    assert np.allclose(eval_signal(isotropic(1e-3), 1500.0, d), math.exp(-1.5), rtol=1e-14)


def test_single_fiber_pin():
    v = eval_signal(single_fiber((0, 0, 1)), 8000.0, (0.0, 0.0, 1.0))
    assert v == pytest.approx(math.exp(-13.6), rel=1e-12)
    assert v == pytest.approx(1.2405e-6, rel=1e-4)


def test_negative_b_rejected():
    with pytest.raises(ValueError):
        eval_signal(isotropic(), -1.0, (0.0, 0.0, 1.0))


def test_q_form_matches_b_form(rng):
    d = unit_vectors(rng, 30)
    b = rng.uniform(0, 8000, 30)
    m = crossing_fibers(60)
    assert np.allclose(eval_signal_q(m, d * np.sqrt(b)[:, None]),
                       [eval_signal(m, bi, di) for bi, di in zip(b, d)], rtol=1e-13)


@pytest.mark.parametrize("fractions", [(0.6, 0.3), (1.2, -0.2), (0.0, 1.0)])
def test_invalid_fractions(fractions):
    with pytest.raises(ValueError):
        crossing_fibers(60, fractions=fractions)


def test_nonpositive_eigenvalues():
    with pytest.raises(ValueError):
        single_fiber(eigenvalues=(1.7e-3, 0.0, 0.2e-3))


def test_isotropic_odf_uniform(rng):
    assert np.allclose(ground_truth_odf(isotropic(), unit_vectors(rng, 40)), 1 / (4 * math.pi), rtol=1e-13)


def test_single_fiber_odf_max_at_axis(rng):
    m = single_fiber((0.3, -0.5, 0.8))
    peak = ground_truth_odf(m, m.axes[0])
    assert np.all(ground_truth_odf(m, unit_vectors(rng, 500)) <= peak * (1 + 1e-12))


@pytest.mark.parametrize("model", REFERENCE_MODELS, ids=["one", "cross90", "cross45"])
def test_odf_integrates_to_one(model):
    pts = fibonacci_sphere(200_000)
    assert abs(ground_truth_odf(model, pts).mean() * 4 * math.pi - 1) < 1e-6


def propagator_odf_oracle(model, v):
    # Propagator of exp(-q^T D q) under exp(2 pi i q.r): pi^1.5 |D|^-1/2 exp(-pi^2 r^T D^-1 r)
    total = 0.0
    for c in model.components:
        D = c.tensor
        a = math.pi ** 2 * v @ np.linalg.inv(D) @ v
        pref = math.pi ** 1.5 / math.sqrt(np.linalg.det(D))
        val, _ = quad(lambda r: pref * math.exp(-a * r * r) * r * r, 0, np.inf, epsabs=0, epsrel=1e-12)
        total += c.fraction * val
    return total


def test_closed_form_matches_propagator_integral(rng):
    m = GaussianMixtureModel((
        Compartment(0.7, FIBER_EIGENVALUES, random_rotation(1)),
        Compartment(0.3, (1.0e-3, 0.6e-3, 0.3e-3), random_rotation(2))))
    for v in unit_vectors(rng, 50):
        assert ground_truth_odf(m, v) == pytest.approx(propagator_odf_oracle(m, v), rel=1e-6)


@given(seed=st.integers(0, 10**6))
def test_signal_rotation_invariance(seed):
    rng = np.random.default_rng(seed)
    R = random_rotation(seed)
    m = crossing_fibers(rng.uniform(0, 90))
    d = unit_vectors(rng, 10)
    b = rng.uniform(0, 8000)
    assert np.allclose(eval_signal(m.rotated(R), b, d @ R.T), eval_signal(m, b, d), rtol=0, atol=1e-12)


def test_swap_symmetry_at_90(rng):
    m = crossing_fibers(90)
    swapped = GaussianMixtureModel(tuple(reversed(m.components)))
    d = unit_vectors(rng, 50)
    assert np.allclose(eval_signal(m, 3000, d), eval_signal(swapped, 3000, d), atol=1e-15)
    # reflecting through the bisector swaps the fibres
    S = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1.0]])
    assert np.allclose(eval_signal(m, 3000, d), eval_signal(m, 3000, d @ S.T), atol=1e-14)


def test_sample_model(scheme, geem):
    m = crossing_fibers(45)
    for sch in (scheme, geem):
        samples = sample_model(m, sch)
        assert all(np.all((s > 0) & (s <= 1)) for s in samples)
    iso = sample_model(isotropic(), scheme)
    assert all(np.ptp(s) <= 1e-13 * s[0] for s in iso)
    dirs = scheme.directions()
    for b, d in zip(scheme.b_values(), dirs):
        assert np.array_equal(eval_signal(m, b, d), eval_signal(m, b, -d))


def test_random_rotation_properties():
    R = random_rotation(11)
    assert abs(np.linalg.det(R) - 1) < 1e-12
    assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert np.array_equal(R, random_rotation(11))
    assert not np.array_equal(R, random_rotation(12))


def test_random_rotation_uniformity():
    e = np.array([0.0, 0.0, 1.0])
    mean = np.mean([random_rotation(s) @ e for s in range(10_000)], axis=0)
    assert np.linalg.norm(mean) < 0.05


def test_json_round_trip():
    m = GaussianMixtureModel((
        Compartment(0.25, FIBER_EIGENVALUES, random_rotation(3)),
        Compartment(0.75, (1e-3, 0.5e-3, 0.2e-3), random_rotation(4))))
    back = GaussianMixtureModel.from_json(m.to_json())
    for a, b in zip(m.components, back.components):
        assert a.fraction == b.fraction and a.eigenvalues == b.eigenvalues
        assert np.allclose(a.rotation, b.rotation, atol=1e-12)


def test_crossing_geometry():
    for angle in (30, 45, 90):
        a, b = crossing_fibers(angle).axes
        assert math.degrees(math.acos(abs(a @ b))) == pytest.approx(angle, abs=1e-10)
