import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tklmc.taming import TamedGradient, tame, taming_error_bound, taming_error_estimate
from tklmc.targets import quadratic_target, quartic_target


def scalar_tame(x, gamma, m=2.5):
    # independent scalar recomputation for the 1-D quartic
    h = x**3 + 5 * x
    f = h - m / 2 * x
    if abs(f) <= math.sqrt(gamma):
        return h
    return 2 * f / (1 + abs(f) / math.sqrt(gamma)) + m / 2 * x


def test_origin():
    t = quartic_target(1)
    for gamma in (0.1, 60.0, 1e4):
        assert tame(t, gamma, [0.0])[0] == 0.0


def test_exact_branch_at_one():
    t = quartic_target(1)
    assert tame(t, 60.0, [1.0])[0] == 6.0


def test_tamed_branch_at_three():
    t = quartic_target(1)
    value = tame(t, 60.0, [3.0])[0]
    assert value == pytest.approx(scalar_tame(3.0, 60.0), rel=1e-14)
    assert value == pytest.approx(16.633, abs=5e-4)


@given(st.floats(-6, 6), st.sampled_from([1.0, 60.0, 691.2]))
def test_matches_scalar_oracle(x, gamma):
    assert tame(quartic_target(1), gamma, [x])[0] == pytest.approx(scalar_tame(x, gamma), rel=1e-13, abs=1e-15)


def test_continuous_at_switch():
    # |f| = sqrt(gamma) exactly: both branches give f
    gamma = 4.0
    f = np.array([2.0])
    assert 2 * f / (1 + np.abs(f) / math.sqrt(gamma)) == pytest.approx(f)


@pytest.mark.parametrize("gamma", [1.0, 60.0, 691.2])
@pytest.mark.parametrize("target", [quartic_target(1), quartic_target(3), quadratic_target(5.0, 2)])
def test_laws_on_random_points(gamma, target, rng):
    x = rng.uniform(-5, 5, size=(20_000, target.dim))
    tg = TamedGradient(target, gamma)
    h = tg(x)
    nx = np.linalg.norm(x, axis=1)
    assert np.all(np.sum(h * x, 1) >= 0.5 * target.m * nx**2 - target.u0 - 1e-12 * nx**2)
    assert np.all(np.linalg.norm(h, axis=1) <= 2 * math.sqrt(gamma) + 0.5 * target.m * nx + 1e-12)
    assert np.all(np.linalg.norm(tg.f_tam(x), axis=1) <= 2 * math.sqrt(gamma) * (1 + 1e-15))
    inside = np.linalg.norm(tg.f(x), axis=1) <= math.sqrt(gamma)
    assert np.array_equal(h[inside], target.grad(x)[inside])


def test_error_estimate_zero_inside():
    t = quartic_target(1)
    assert taming_error_estimate(t, 60.0, np.linspace(-0.5, 0.5, 11)[:, None]) == 0.0


def test_error_estimate_single_point():
    # (h_tam(3) - h(3))^2 with h(3) = 42
    expected = (scalar_tame(3.0, 60.0) - 42.0) ** 2
    assert taming_error_estimate(quartic_target(1), 60.0, [[3.0]]) == pytest.approx(expected, rel=1e-13)
    assert expected == pytest.approx(643.484, abs=1e-3)


def test_error_decreases_with_gamma():
    t = quartic_target(1)
    x = np.random.default_rng(7).standard_normal((5000, 1)) * 1.5
    e60, e240 = taming_error_estimate(t, 60.0, x), taming_error_estimate(t, 240.0, x)
    assert e240 <= e60
    assert e60 == pytest.approx(150.0106791302409, rel=1e-12)
    assert e240 == pytest.approx(90.2951046536088, rel=1e-12)


def test_error_below_moment_bound():
    t = quartic_target(1)
    x = np.random.default_rng(3).standard_normal((5000, 1))
    for gamma in (60.0, 240.0, 1000.0):
        assert taming_error_estimate(t, gamma, x) <= taming_error_bound(t, gamma, 1.0, x)


def test_empty_samples_rejected():
    with pytest.raises(ValueError):
        taming_error_estimate(quartic_target(1), 60.0, np.empty((0, 1)))
