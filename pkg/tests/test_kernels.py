import math

import numpy as np
import pytest
from scipy.integrate import quad

from tklmc.kernels import build_kernel, covariance_entries, pair_from_normals, psi, sample_pair


def quad_cov(gamma, lam):
    p0 = lambda t: math.exp(-gamma * t)
    p1 = lambda t: -math.expm1(-gamma * t) / gamma
    opts = dict(epsabs=1e-15, epsrel=1e-13, limit=200)
    return (
        quad(lambda t: p0(t) ** 2, 0, lam, **opts)[0],
        quad(lambda t: p0(t) * p1(t), 0, lam, **opts)[0],
        quad(lambda t: p1(t) ** 2, 0, lam, **opts)[0],
    )


GRID = [(g, z / g) for g in (0.5, 1.0, 60.0, 200.0) for z in (1e-6, 0.01, 0.46875, 1.0, 5.0)] + [(60.0, 2.0**-7)]


def test_psi_values():
    assert psi(0, 0.0, 3.0) == 1.0
    assert psi(1, 0.5, 2.0) == pytest.approx((1 - math.exp(-1)) / 2, rel=1e-15)
    assert psi(1, 0.5, 2.0) == pytest.approx(quad(lambda s: math.exp(-2 * s), 0, 0.5)[0], rel=1e-12)
    with pytest.raises(ValueError):
        psi(3, 1.0, 1.0)
    with pytest.raises(ValueError):
        psi(0, -1.0, 1.0)


@pytest.mark.parametrize("gamma", [0.5, 2.0, 60.0])
@pytest.mark.parametrize("t", [1e-3, 0.05, 0.7])
def test_psi_derivative_chain(gamma, t):
    h = 1e-5 if t > 1e-4 else t / 10
    for order in (1, 2):
        fd = (psi(order, t + h, gamma) - psi(order, t - h, gamma)) / (2 * h)
        assert fd == pytest.approx(psi(order - 1, t, gamma), rel=1e-6)


def test_psi_small_argument_series():
    # psi_1 ~ t - gamma t^2/2 + gamma^2 t^3/6
    g, t = 2.0, 1e-9
    assert psi(1, t, g) == pytest.approx(t - g * t**2 / 2 + g**2 * t**3 / 6, rel=1e-15)
    assert psi(2, t, g) == pytest.approx(t**2 / 2 - g * t**3 / 6, rel=1e-12)


@pytest.mark.parametrize("gamma,lam", GRID)
def test_closed_form_matches_quadrature(gamma, lam):
    got = covariance_entries(gamma, lam)
    want = quad_cov(gamma, lam)
    np.testing.assert_allclose(got, want, atol=1e-10, rtol=1e-9)
    c11, c12, c22 = got
    assert c11 <= lam and c12 <= lam**2 / 2 and c22 <= lam**3 / 3


def test_gamma_one_lambda_one_values():
    c11, c12, c22 = covariance_entries(1.0, 1.0)
    assert c11 == pytest.approx(0.4323324, abs=1e-7)
    assert c12 == pytest.approx(0.1997882, abs=1e-7)
    # quadrature gives 0.16809124...; see quad_cov
    assert c22 == pytest.approx(0.1680912, abs=1e-7)


def test_small_lambda_limits():
    lam = 1e-12
    c11, c12, c22 = covariance_entries(1.0, lam)
    assert c11 == pytest.approx(lam, rel=1e-6)
    assert c12 == pytest.approx(lam**2 / 2, rel=1e-6)
    assert c22 == pytest.approx(lam**3 / 3, rel=1e-6)


def test_kernel_fields_and_cholesky():
    k = build_kernel(60.0, 2.0**-7)
    L = np.array([[k.chol_l11, 0], [k.chol_l21, k.chol_l22]])
    np.testing.assert_allclose(L @ L.T, k.cov, rtol=1e-12, atol=1e-20)
    assert k.psi0 == pytest.approx(math.exp(-60 * 2.0**-7))
    assert k.psi2 == pytest.approx((k.lam - k.psi1) / k.gamma, rel=1e-10)
    assert k.c11 * k.c22 - k.c12**2 >= -1e-18


def test_build_kernel_rejects_bad_args():
    with pytest.raises(ValueError):
        build_kernel(0.0, 0.1)
    with pytest.raises(ValueError):
        build_kernel(1.0, -0.1)


def test_rank_one_fallback():
    k = build_kernel(1.0, 1.0)
    # force the degenerate case through the public mapping
    from dataclasses import replace
    degenerate = replace(k, chol_l22=0.0)
    xi, xip = pair_from_normals(degenerate, np.array([1.0, -2.0]), np.array([5.0, 5.0]))
    np.testing.assert_allclose(xip / xi, k.chol_l21 / k.chol_l11)


def test_seeded_first_draw_regression():
    k = build_kernel(1.0, 1.0)
    xi, xip = sample_pair(k, np.random.default_rng(42), 1)
    assert xi[0] == pytest.approx(0.20035753, abs=1e-8)
    assert xip[0] == pytest.approx(-0.19367287, abs=1e-8)


def test_pair_shapes(rng):
    k = build_kernel(2.0, 0.1)
    xi, xip = sample_pair(k, rng, 3, size=5)
    assert xi.shape == xip.shape == (5, 3)
