import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from stabledom.errors import ConfigError
from stabledom.functions import make_function


@pytest.mark.parametrize("spec", [
    {"name": "gaussian", "center": 0.3, "width": 0.7},
    {"name": "bump", "center": -0.2, "radius": 1.3},
    {"name": "indicator", "lo": -1.0, "hi": 0.5},
])
def test_integral_matches_quadrature_1d(spec):
    spec = dict(spec)
    phi = make_function(spec.pop("name"), 1, **spec)
    val, _ = integrate.quad(lambda x: float(phi.value([[x]])[0]), -10, 10, points=[-1.0, 0.5], limit=200)
    assert phi.integral() == pytest.approx(val, rel=1e-8)


def test_bump_integral_2d():
    phi = make_function("bump", 2, center=[0.5, -0.5], radius=1.0)
    val, _ = integrate.dblquad(lambda y, x: float(phi.value([[x, y]])[0]), -0.5, 1.5, -1.5, 0.5, epsabs=1e-11)
    assert phi.integral() == pytest.approx(val, rel=1e-7)


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_bump_derivatives_by_finite_differences(x, y):
    phi = make_function("bump", 2, center=[0.1, -0.1], radius=1.2)
    p = np.array([[x, y]])
    h = 1e-6
    num_grad = np.array([(phi.value(p + h * e) - phi.value(p - h * e))[0] / (2 * h) for e in np.eye(2)])
    assert np.allclose(phi.grad(p)[0], num_grad, atol=1e-6)
    num_hess = np.array([(phi.grad(p + h * e) - phi.grad(p - h * e))[0] / (2 * h) for e in np.eye(2)])
    assert np.allclose(phi.hessian(p)[0], num_hess, atol=1e-5)


def test_gaussian_derivatives():
    phi = make_function("gaussian", 1, center=0.0, width=1.0)
    x = np.array([[0.7]])
    assert phi.grad(x)[0, 0] == pytest.approx(-0.7 * math.exp(-0.245))
    assert phi.hessian(x)[0, 0, 0] == pytest.approx((0.49 - 1.0) * math.exp(-0.245))


@given(st.floats(-3, 3), st.floats(0.01, 0.5))
def test_cell_average_indicator_exact(c, h):
    phi = make_function("indicator", 1, lo=-1.0, hi=0.5)
    avg = phi.cell_average(np.array([[c]]), h)[0]
    overlap = max(0.0, min(c + h / 2, 0.5) - max(c - h / 2, -1.0)) / h
    assert avg == pytest.approx(overlap, abs=1e-12)


def test_cell_average_gaussian_matches_erf():
    phi = make_function("gaussian", 1, center=0.0, width=1.0)
    h = 0.4
    val, _ = integrate.quad(lambda x: math.exp(-x * x / 2), 0.8, 1.2)
    assert phi.cell_average(np.array([[1.0]]), h)[0] == pytest.approx(val / h, rel=1e-12)


def test_support_and_exterior():
    b = make_function("bump", 1, center=2.0, radius=0.5)
    assert b.support_radius() == 0.5
    assert b.value([[3.0]])[0] == 0.0
    assert make_function("constant", 1, level=2.0).exterior == 2.0
    assert make_function("zero", 1).integral() == 0.0


def test_bad_specs():
    with pytest.raises(ConfigError):
        make_function("indicator", 1, lo=1.0, hi=0.0)
    with pytest.raises(ConfigError):
        make_function("wavelet", 1)
    with pytest.raises(ConfigError):
        make_function("bump", 1, wrong=1)
