import math

import mpmath
import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, strategies as st
from numpy.polynomial import hermite
from numpy.testing import assert_allclose
from scipy.integrate import quad

from spfq.math_core import (laguerre_half, laguerre_roots, normalized_legendre, radial_function,
                            radial_matrix, radial_weights, real_sph_harm, sh_matrix, sph_bessel)

# roots of L_4^{1/2}: squares of the positive roots of H_9, cross-checked with mpmath
ROOTS_N4 = np.array([0.5235260767382691, 2.1566487632690943, 5.1373875461767116, 10.182437613815925])


def closed_form(n, x):
    return {
        0: np.ones_like(x),
        1: 1.5 - x,
        2: 1.875 - 2.5 * x + 0.5 * x**2,
        3: (13.125 - 26.25 * x + 10.5 * x**2 - x**3) / 6.0,
    }[n]


def test_laguerre_low_degrees():
    assert laguerre_half(0, 3.7) == 1.0
    assert laguerre_half(1, 1.5) == 0.0
    x = np.random.default_rng(0).uniform(0, 20, 100)
    for n in range(4):
        assert_allclose(laguerre_half(n, x), closed_form(n, x), rtol=1e-12, atol=1e-12)


def test_laguerre_vanishes_at_root():
    assert abs(laguerre_half(4, ROOTS_N4[0])) < 1e-9


def test_roots_match_hermite_oracle():
    h = hermite.hermroots([0] * 9 + [1])
    assert_allclose(np.sort(h[h > 0] ** 2), ROOTS_N4, rtol=1e-12)
    assert_allclose(laguerre_roots(4), ROOTS_N4, atol=1e-12)
    assert_allclose(laguerre_roots(1), [1.5])


def test_root_ratios_give_reference_b_values():
    x = laguerre_roots(4)
    assert_allclose(x[:3] / x[3], np.array([411.3, 1694.4, 4036.3]) / 8000, rtol=1e-3)


@pytest.mark.parametrize("N", [2, 5, 9, 16, 32])
def test_roots_against_mpmath(N):
    x = laguerre_roots(N)
    assert np.all(np.diff(x) > 0) and x[0] > 0
    for xi in x[:: max(N // 4, 1)]:
        exact = mpmath.findroot(lambda t: mpmath.laguerre(N, 0.5, t), xi)
        assert abs(xi - float(exact)) < 1e-10 * max(1.0, xi)


def test_roots_rejects_out_of_range():
    with pytest.raises(ValueError):
        laguerre_roots(0)
    with pytest.raises(ValueError):
        laguerre_roots(33)


@pytest.mark.parametrize("N", range(1, 9))
def test_quadrature_exact_for_polynomials(N):
    zeta = 1.7
    rq = radial_weights(N, zeta)
    w = rq.weights / (0.5 * zeta**1.5 * np.exp(rq.nodes))
    for k in range(2 * N):
        exact = math.gamma(k + 1.5)
        assert abs(np.sum(w * rq.nodes**k) - exact) < 1e-9 * exact


@pytest.mark.parametrize("N", range(1, 9))
@pytest.mark.parametrize("zeta", [0.1, 1.0, 37.0])
def test_radial_orthonormality(N, zeta):
    rq = radial_weights(N, zeta)
    assert_allclose(rq.q_radii, np.sqrt(zeta * rq.nodes), rtol=0, atol=0)
    R = radial_matrix(N, rq.q_radii, zeta)
    assert np.max(np.abs((R * rq.weights) @ R.T - np.eye(N))) < 1e-10


def test_orthonormality_against_adaptive_integration():
    zeta = 785.0
    rq = radial_weights(4, zeta)
    R = radial_matrix(4, rq.q_radii, zeta)
    G = (R * rq.weights) @ R.T
    for n in range(4):
        for m in range(4):
            val, _ = quad(lambda q: radial_function(n, q, zeta) * radial_function(m, q, zeta) * q * q,
                          0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
            assert abs(G[n, m] - val) < 1e-10


def test_single_node_weight():
    for zeta in (0.3, 5.0, 800.0):
        rq = radial_weights(1, zeta)
        assert abs(rq.weights[0] * radial_function(0, rq.q_radii[0], zeta) ** 2 - 1) < 1e-12


def test_weights_scale_with_zeta():
    assert_allclose(radial_weights(5, 4 * 2.3).weights, 8 * radial_weights(5, 2.3).weights, rtol=1e-13)


def test_constant_harmonic():
    assert abs(real_sph_harm(0, 0, 0.3, 1.1) - 1 / math.sqrt(4 * math.pi)) < 1e-15


def test_real_harmonics_match_scipy():
    rng = np.random.default_rng(3)
    theta = rng.uniform(0, np.pi, 50)
    phi = rng.uniform(0, 2 * np.pi, 50)
    for l in range(0, 13):
        for m in range(-l, l + 1):
            ref = sp.sph_harm_y(l, abs(m), theta, phi)
            if m > 0:
                ref = math.sqrt(2) * (-1) ** m * ref.real
            elif m < 0:
                ref = math.sqrt(2) * (-1) ** m * ref.imag
            else:
                ref = ref.real
            assert_allclose(real_sph_harm(l, m, theta, phi), ref, atol=1e-12)


def test_orthonormality_dense_grid():
    x, w = np.polynomial.legendre.leggauss(30)
    nphi = 60
    theta = np.repeat(np.arccos(x), nphi)
    phi = np.tile(2 * np.pi * np.arange(nphi) / nphi, 30)
    weights = np.repeat(w, nphi) * 2 * np.pi / nphi
    Y = sh_matrix(13, theta, phi, even_only=False)
    assert np.max(np.abs((Y * weights[:, None]).T @ Y - np.eye(Y.shape[1]))) < 1e-8


@given(st.integers(0, 12), st.data(), st.floats(0, np.pi), st.floats(0, 2 * np.pi))
def test_antipodal_parity(l, data, theta, phi):
    m = data.draw(st.integers(-l, l))
    a = real_sph_harm(l, m, np.pi - theta, phi + np.pi)
    b = (-1) ** l * real_sph_harm(l, m, theta, phi)
    assert abs(a - b) < 1e-10


def test_legendre_stable_high_degree():
    P = normalized_legendre(64, np.linspace(-1, 1, 201))
    assert np.all(np.isfinite(P))
    assert_allclose(P[64, 0], sp.sph_harm_y(64, 0, np.arccos(np.linspace(-1, 1, 201)), 0).real, atol=1e-12)


def test_bessel_closed_forms():
    x = np.linspace(0.01, 30, 500)
    assert_allclose(sph_bessel(0, x), np.sin(x) / x, atol=1e-15)
    assert sph_bessel(0, 0.0) == 1.0
    assert sph_bessel(2, 0.0) == 0.0


def test_bessel_against_mpmath():
    exact = float(mpmath.sqrt(mpmath.pi / 20) * mpmath.besselj(4.5, 10))
    assert abs(sph_bessel(4, 10.0) - exact) < 1e-10


@pytest.mark.parametrize("l", [0, 1, 2, 5, 10, 20, 40])
def test_bessel_against_scipy(l):
    x = np.concatenate([np.linspace(0, 2 * l + 5, 400), [1e-6, 1e-3, np.pi, 2 * np.pi]])
    assert_allclose(sph_bessel(l, x), sp.spherical_jn(l, x), atol=1e-13, rtol=1e-10)
