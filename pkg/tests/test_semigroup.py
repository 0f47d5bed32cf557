import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special, stats

from stabledom.errors import LatticeMismatchError, SeriesTruncationError
from stabledom.functions import make_function
from stabledom.kernels import isotropic, stable_like
from stabledom.lattice import Lattice
from stabledom.semigroup import (Field, apply_gamma, apply_generator, apply_limit_generator, apply_semigroup,
                                 poisson_window, reference_density, stable_symbol_constant, truncated_generator)
from stabledom.truncation import make_context


@given(st.floats(0.01, 5000.0))
@settings(max_examples=30)
def test_poisson_window_matches_pmf(lam):
    lo, w, neglected = poisson_window(lam, 1e-12)
    ks = np.arange(lo, lo + len(w))
    assert np.allclose(w, stats.poisson.pmf(ks, lam), rtol=1e-9, atol=1e-300)
    assert neglected <= 1e-12
    assert math.fsum(w) == pytest.approx(1.0 - neglected, abs=1e-12)


@pytest.fixture(scope="module")
def setup():
    ctx = make_context(isotropic(1.0, 1), 0.25)
    lat = Lattice(16.0, 257, 1)
    phi = Field.from_function(lat, make_function("bump", 1, center=0.0, radius=1.0))
    return ctx, lat, phi


def test_time_zero_is_identity(setup):
    ctx, lat, phi = setup
    assert np.array_equal(apply_semigroup(ctx, lat, phi, 0.0).result.values, phi.values)


@pytest.mark.parametrize("t", [0.1, 1.0, 2.0])
def test_constants_are_preserved(setup, t):
    ctx, lat, _ = setup
    one = Field.constant(lat, 1.0)
    assert np.max(np.abs(apply_semigroup(ctx, lat, one, t).result.values - 1.0)) < 1e-9


def test_positive_and_contractive(setup):
    ctx, lat, phi = setup
    u = apply_semigroup(ctx, lat, phi, 1.0).result
    assert np.all(u.values >= 0)
    assert u.sup() <= phi.sup() + 1e-12


def test_semigroup_law(setup):
    ctx, lat, phi = setup
    whole = apply_semigroup(ctx, lat, phi, 1.0).result.values
    split = apply_semigroup(ctx, lat, apply_semigroup(ctx, lat, phi, 0.7).result, 0.3).result.values
    assert np.max(np.abs(whole - split)) < 1e-9


@given(st.floats(1.0, 3.0))
@settings(max_examples=5)
def test_uniformization_rate_does_not_matter(rate_factor):
    ctx = make_context(isotropic(1.0, 1), 0.25)
    lat = Lattice(16.0, 257, 1)
    phi = Field.from_function(lat, make_function("indicator", 1, lo=1.0, hi=2.0))
    u = apply_semigroup(ctx, lat, phi, 1.0).result.values
    v = apply_semigroup(ctx, lat, phi, 1.0, rate=rate_factor * ctx.b_bar).result.values
    assert np.max(np.abs(u - v)) < 1e-8


def test_term_cap(setup):
    ctx, lat, phi = setup
    with pytest.raises(SeriesTruncationError):
        apply_semigroup(ctx, lat, phi, 100.0, max_terms=50)


def test_lattice_mismatch(setup):
    ctx, lat, phi = setup
    with pytest.raises(LatticeMismatchError):
        apply_semigroup(ctx, Lattice(8.0, 129, 1), phi, 1.0)


def test_gamma_rate_guard(setup):
    ctx, lat, phi = setup
    with pytest.raises(ValueError):
        apply_gamma(ctx, lat, phi, rate=0.5 * ctx.b_bar)


def test_generator_kills_constants(setup):
    ctx, lat, _ = setup
    g = apply_generator(ctx, lat, Field.constant(lat, 3.0))
    assert np.max(np.abs(g.values)) < 1e-10 and g.exterior == 0.0


def test_lattice_generator_matches_quadrature():
    ctx = make_context(isotropic(1.0, 1), 0.5)
    lat = Lattice(40.0, 2049, 1)
    phi = make_function("gaussian", 1, center=0.0, width=1.0)
    lattice_value = apply_generator(ctx, lat, Field.from_function(lat, phi, average=False)).at([0.0])
    exact = truncated_generator(ctx.kernel, phi, [[0.0]], 0.5)[0]
    assert lattice_value == pytest.approx(exact, rel=2e-2)


def test_limit_generator_gaussian_1d():
    k = isotropic(1.0, 1)
    phi = make_function("gaussian", 1, center=0.0, width=1.0)
    res = apply_limit_generator(k, phi, [[0.0]], [0.4, 0.2, 0.1, 0.05])
    assert res.limit[0] == pytest.approx(-math.sqrt(2 * math.pi), rel=1e-6)
    assert res.expected_slope == pytest.approx(1.0)


def test_limit_generator_gaussian_2d():
    k = isotropic(1.0, 2)
    phi = make_function("gaussian", 2, center=[0.0, 0.0], width=1.0)
    res = apply_limit_generator(k, phi, [[0.0, 0.0]], [0.4, 0.2, 0.1, 0.05])
    assert res.limit[0] == pytest.approx(-2 * math.pi * math.sqrt(math.pi / 2), rel=1e-6)
    assert abs(res.slope - 1.0) < 0.3


def test_limit_generator_needs_sweep():
    with pytest.raises(ValueError):
        apply_limit_generator(isotropic(1.0, 1), make_function("gaussian", 1), [[0.0]], [0.5, 0.25])


def test_non_symmetric_kernel_slope_reported():
    res = apply_limit_generator(stable_like(0.5, 1, 0.5, 1.0), make_function("gaussian", 1), [[0.3]],
                                [0.4, 0.2, 0.1, 0.05])
    assert res.expected_slope == pytest.approx(0.5)
    assert np.isfinite(res.slope) and res.slope > 0


@pytest.mark.parametrize("alpha,d", [(0.5, 1), (1.0, 1), (1.5, 1), (0.7, 2), (1.0, 2), (1.6, 2)])
def test_symbol_constant_closed_form(alpha, d):
    exact = math.pi ** (d / 2) * abs(special.gamma(-alpha / 2)) / (2 ** alpha * special.gamma((d + alpha) / 2))
    assert stable_symbol_constant(alpha, d) == pytest.approx(exact, rel=1e-10)


def test_symbol_constant_special_values():
    assert stable_symbol_constant(1.0, 1) == pytest.approx(math.pi, rel=1e-11)
    assert stable_symbol_constant(1.0, 2) == pytest.approx(2 * math.pi, rel=1e-11)


@given(st.floats(0.0, 20.0), st.floats(0.1, 3.0))
@settings(max_examples=15)
def test_reference_density_cauchy_1d(x, t):
    c = math.pi * t
    assert reference_density(1.0, 1, t, x) == pytest.approx(c / (math.pi * (c * c + x * x)), rel=1e-7)


@given(st.floats(0.0, 10.0))
@settings(max_examples=10)
def test_reference_density_cauchy_2d(r):
    c = 2 * math.pi
    exact = c / (2 * math.pi * (c * c + r * r) ** 1.5)
    assert reference_density(1.0, 2, 1.0, [r, 0.0]) == pytest.approx(exact, rel=1e-6)


def test_reference_density_origin():
    assert reference_density(1.0, 1, 1.0, 0.0) == pytest.approx(1 / math.pi ** 2, rel=1e-10)


def test_reference_density_scaling():
    # p(t, x) = t^(-d/alpha) p(1, t^(-1/alpha) x)
    a, t, x = 1.5, 2.0, 0.7
    assert reference_density(a, 1, t, x) == pytest.approx(t ** (-1 / a) * reference_density(a, 1, 1.0, x * t ** (-1 / a)),
                                                          rel=1e-8)


def test_reference_density_normalized():
    val, _ = integrate.quad(lambda x: 2 * reference_density(1.5, 1, 1.0, x), 0, 60, limit=200)
    tail = 2 * 1.0 * 60 ** -1.5 / 1.5  # p ~ t |x|^(-alpha-1) for large |x|
    assert val + tail == pytest.approx(1.0, abs=2e-3)
