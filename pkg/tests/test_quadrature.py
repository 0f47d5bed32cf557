import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stabledom.quadrature import (QuadSpec, ball_volume, distance_to_box, gauss_legendre, polar_integral,
                                  radial_rule, sphere_area, sphere_rule)


def test_sphere_area_known_values():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert ball_volume(3) == pytest.approx(4 * math.pi / 3)


@pytest.mark.parametrize("order", [2, 5, 8])
def test_gauss_legendre_exact_for_polynomials(order):
    x, w = gauss_legendre(order)
    for k in range(2 * order):
        assert np.sum(w * x ** k) == pytest.approx(1.0 / (k + 1), rel=1e-13)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_sphere_rule_integrates_constants_and_is_balanced(d):
    dirs, w = sphere_rule(d, 256, 512)
    assert np.sum(w) == pytest.approx(sphere_area(d), rel=1e-12)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)
    assert np.allclose(w @ dirs, 0.0, atol=1e-12)


@given(st.floats(0.2, 1.9), st.floats(1e-3, 1.0))
def test_radial_rule_power_integral(alpha, lo):
    r, w = radial_rule(lo, 100.0, 64, 8)
    exact = (lo ** -alpha - 100.0 ** -alpha) / alpha
    assert np.sum(w * r ** (-alpha - 1)) == pytest.approx(exact, rel=1e-10)


def test_radial_rule_empty_when_reversed():
    r, w = radial_rule(np.array(1.0), np.array([0.5, 2.0]), 8, 4)
    assert w.shape[0] == 2
    assert np.all(w[0] == 0)


def test_polar_integral_gaussian_2d():
    spec = QuadSpec()
    x = np.zeros((1, 2))
    val = polar_integral(lambda xx, yy: np.exp(-np.sum(yy ** 2, axis=-1)), x, 1e-6, 30.0, spec)
    assert val[0] == pytest.approx(math.pi, rel=1e-8)


def test_distance_to_box_axis_directions():
    dirs = np.array([[1.0, 0.0], [0.0, -1.0]])
    dist = distance_to_box(np.array([[0.5, 0.0]]), dirs, 2.0)
    assert dist[0] == pytest.approx([1.5, 2.0])


def test_tail_radius_default():
    assert QuadSpec().tail_radius(0.5) == 1e3
    assert QuadSpec().tail_radius(5.0) == 5e3
    assert QuadSpec(r_tail=10.0).tail_radius(0.1) == 10.0
