import math
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from stabledom.errors import CoincidentPointsError
from stabledom.functions import make_function
from stabledom.kernels import isotropic, make_kernel, stable_like
from stabledom.lattice import Lattice, iterate_kernels
from stabledom.montecarlo import DensityEstimate, RadialBinning
from stabledom.quadrature import QuadSpec
from stabledom.truncation import make_context
from stabledom import verifier
from stabledom.verifier import (SubharmonicSample, _ball_integral, bound_cells, check_density_bound, check_estimates,
                                check_intensity_bounds, check_semigroup_bound, check_series_bound,
                                check_subharmonicity, decay_constants, decay_threshold, generator_decay,
                                series_ratio)


# ------------------------------------------------------------- estimate 3 side condition

def _n0_exact(q: Fraction, power: int, n_max: int = 400) -> int:
    fails = [n for n in range(1, n_max) if not (q ** n * (n + 1) ** (power + 1) < 1)]
    return max(fails, default=0) + 1


def test_n0_half_rate_unit_power():
    # (1/2)^n (n+1)^2 < 1 first holds for good at n = 6 (49/64); n = 5 gives 36/32
    assert decay_threshold(0.5, 1.0) == 6
    assert _n0_exact(Fraction(1, 2), 1) == 6


@pytest.mark.parametrize("a_over_A,power", [(0.5, 2), (0.25, 1), (0.1, 2), (0.75, 1)])
def test_n0_against_exact_arithmetic(a_over_A, power):
    assert decay_threshold(a_over_A, float(power)) == _n0_exact(1 - Fraction(a_over_A).limit_denominator(100), power)


def test_n0_full_rate():
    assert decay_threshold(1.0, 1.0) == 1


def test_proof_constants_reported():
    c = decay_constants(isotropic(0.5, 1))
    assert c["p"] == pytest.approx(4.0)  # d 2^(d/alpha - 1) / alpha with d/alpha = 2
    assert c["a_over_A"] == pytest.approx(1.0)
    c = decay_constants(isotropic(1.5, 1))
    assert c["p"] == pytest.approx(1 / 1.5)
    c = decay_constants(stable_like(0.5, 1, 0.5, 1.0))
    assert c["a_over_A"] == pytest.approx(0.5 / 1.5)
    assert c["eta"] == pytest.approx(((1 / 3) ** 2 / (2 * (1 + c["p"]))) ** 2)
    assert math.isfinite(c["C"])


# ------------------------------------------------------------------- series bound

def test_series_p0_is_identity():
    for x in [1e-3, 0.5, 3.0, 20.0]:
        assert series_ratio(0.0, x) == pytest.approx(1.0, rel=1e-14)


def test_series_p1_x1_exponential_integral():
    exact = special.expi(1.0) - np.euler_gamma  # sum 1/(n! n)
    assert series_ratio(1.0, 1.0) * math.expm1(1.0) == pytest.approx(exact, rel=1e-14)
    assert exact == pytest.approx(1.3179, abs=1e-4)


@given(st.floats(0.0, 1.0), st.floats(1e-3, 20.0))
def test_series_envelope_on_unit_interval(p, x):
    assert series_ratio(p, x) <= 2.0 ** p * (1 + 1e-12)


def test_series_report():
    rep = check_series_bound([0.0, 1.0, 2.0, 3.0])
    assert rep.passed
    consts = {c.name: c.fitted_constant for c in rep.children}
    assert consts["series p=0"] == pytest.approx(1.0, abs=1e-14)
    assert consts["series p=1"] <= 2.0
    assert math.isfinite(consts["series p=2"]) and math.isfinite(consts["series p=3"])


# --------------------------------------------------------------- subharmonicity

def test_ball_integral_against_adaptive_quadrature():
    k = isotropic(1.0, 1)
    s = SubharmonicSample(np.array([0.0]), np.array([1.0]), 0.1)
    kappa = 0.6
    f = lambda z: abs(z) ** -2 * abs(z - 1.0) ** -2
    exact = sum(integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-12)[0]
                for lo, hi in [(1 - kappa, 1 - 0.1), (1.1, 1 + kappa)])
    assert _ball_integral(k, s, kappa, QuadSpec()) == pytest.approx(exact, rel=1e-9)


def test_ball_integral_empty_when_ball_inside_truncation():
    s = SubharmonicSample(np.array([0.0]), np.array([1.0]), 0.5)
    assert _ball_integral(isotropic(1.0, 1), s, 0.4, QuadSpec()) == 0.0


def test_kappa_certified_for_cauchy():
    rep, kappa = check_subharmonicity(isotropic(1.0, 1))
    assert rep.passed and kappa >= 0.05
    assert rep.extra["ratio_at_kappa"] <= 1.0


def test_coincident_pair_rejected():
    s = SubharmonicSample(np.array([0.2]), np.array([0.2]), 0.1)
    with pytest.raises(CoincidentPointsError):
        check_subharmonicity(isotropic(1.0, 1), pair_set=[s])


def test_subharmonicity_2d_runs():
    rep, kappa = check_subharmonicity(isotropic(1.0, 2), n_pairs=8)
    assert kappa > 0.02 and rep.passed


# -------------------------------------------------------------------- estimates

@pytest.fixture(scope="module")
def cauchy_iterates():
    ctx = make_context(isotropic(1.0, 1), 0.5)
    return iterate_kernels(ctx, Lattice(40.0, 1025, 1), [0.0], 20)


def test_estimate_base_constants(cauchy_iterates):
    ratios = verifier.estimate_ratios(cauchy_iterates, isotropic(1.0, 1))
    # first order: M times cell average / cell average of the untruncated envelope
    assert ratios[1][0] == pytest.approx(1.0, rel=1e-12)
    assert ratios[2][0] <= 1.0 * 2.0 ** (-2)


def test_estimates_pass(cauchy_iterates):
    rep = check_estimates(cauchy_iterates, isotropic(1.0, 1))
    assert rep.passed, rep.to_markdown()
    assert [c.name for c in rep.children] == ["mass identity gate", "growth bound", "diagonal bound", "diagonal decay bound"]


def test_mass_gate_blocks_estimates(cauchy_iterates):
    broken = [replace(it, values=it.values * 1.5) for it in cauchy_iterates]
    rep = check_estimates(broken, isotropic(1.0, 1))
    assert not rep.passed and len(rep.children) == 1


def test_wrong_declared_M_breaks_base_constant(cauchy_iterates):
    rep = check_estimates(cauchy_iterates, make_kernel("isotropic", {"alpha": 1.0, "dim": 1}, M=0.5))
    assert not rep.passed
    assert any(f.endswith("growth bound") for f in rep.failures())


# ---------------------------------------------------------------- semigroup bound

def test_bound_cells_1d_against_quadrature():
    lat = Lattice(4.0, 41, 1)
    t, alpha = 0.5, 1.2
    cells = bound_cells(lat, t, alpha)
    prof = lambda y: min(t ** (-1 / alpha), t * max(abs(y), 1e-12) ** (-alpha - 1))
    for k in [0, 1, 3, 15]:
        c = k * lat.h
        exact = integrate.quad(prof, c - lat.h / 2, c + lat.h / 2, points=[t ** (1 / alpha)], epsabs=0)[0]
        assert cells[40 + k] == pytest.approx(exact, rel=1e-10)


def test_bound_cells_2d_against_quadrature():
    lat = Lattice(2.0, 21, 2)
    t, alpha = 0.5, 1.0
    cells = bound_cells(lat, t, alpha).reshape(41, 41)
    prof = lambda y2, y1: min(t ** -2.0, t * max(math.hypot(y1, y2), 1e-12) ** -3)
    for k1, k2 in [(0, 0), (1, 2), (6, 0)]:
        c1, c2 = k1 * lat.h, k2 * lat.h
        exact = integrate.dblquad(prof, c1 - lat.h / 2, c1 + lat.h / 2, c2 - lat.h / 2, c2 + lat.h / 2,
                                  epsabs=1e-13)[0]
        assert cells[20 + k1, 20 + k2] == pytest.approx(exact, rel=2e-3)


def test_semigroup_bound_zero_function_is_vacuous():
    ctxs = [make_context(isotropic(1.0, 1), e) for e in (0.5, 0.25)]
    rep = check_semigroup_bound(ctxs, Lattice(8.0, 257, 1), [make_function("zero", 1)], [0.5])
    assert rep.passed and rep.fitted_constant == 0.0


def test_semigroup_bound_small_time_far_field_constant():
    # phi away from x, small t: LHS ~ t int phi f_eps, so the fitted constant approaches M from below
    ctxs = [make_context(isotropic(1.0, 1), e) for e in (0.5, 0.25)]
    phi = make_function("indicator", 1, lo=2.0, hi=3.0)
    rep = check_semigroup_bound(ctxs, Lattice(16.0, 1025, 1), [phi], [0.01])
    assert rep.passed
    assert 0.8 < rep.fitted_constant <= 1.0 + 1e-9


def test_semigroup_bound_needs_integrable_phi():
    ctx = make_context(isotropic(1.0, 1), 0.5)
    with pytest.raises(ValueError):
        check_semigroup_bound(ctx, Lattice(8.0, 257, 1), [make_function("constant", 1)], [0.5])


# ---------------------------------------------------------------- density bound

def _reference_estimate(eps, n_paths=10 ** 7):
    edges = np.concatenate([[0.0], np.geomspace(0.05, 20, 20)])
    mass = np.array([2 * integrate.quad(lambda r: 1 / (math.pi ** 2 + r * r), a, b)[0]
                     for a, b in zip(edges[:-1], edges[1:])])
    counts = np.round(mass * n_paths).astype(np.int64)
    return DensityEstimate(RadialBinning(edges, 1), np.zeros(1), 1.0, eps, n_paths, counts, 0, 0)


def test_density_bound_on_exact_cauchy_law():
    rep = check_density_bound([_reference_estimate(e) for e in (0.1, 0.05)], 1.0)
    assert rep.passed
    assert rep.fitted_constant >= 1 / math.pi ** 2
    # p(1, y) = 1/(pi^2 + y^2), so the tail ratio p / |y|^-2 increases to 1
    assert rep.fitted_constant < 1.0


def test_density_bound_without_estimates_fails():
    assert not check_density_bound([], 1.0).passed


def test_density_bound_sparse_bins_fail():
    est = _reference_estimate(0.1, n_paths=50)
    rep = check_density_bound([est], 1.0, min_count=10 ** 6)
    assert not rep.passed


# ---------------------------------------------------------------- spot checks

def test_intensity_bounds():
    assert check_intensity_bounds(isotropic(1.0, 1), [0.25, 0.5, 1.0]).passed
    assert check_intensity_bounds(stable_like(0.5, 1, 0.5, 1.0), [0.5, 1.0]).passed
    bad = make_kernel("isotropic", {"alpha": 1.0, "dim": 1}, M=0.5)
    assert not check_intensity_bounds(bad, [0.5]).passed


@pytest.mark.parametrize("d", [1, 2])
def test_generator_decay_tends_to_mass(d):
    phi = make_function("bump", d, center=[0.0] * d if d > 1 else 0.0, radius=1.0)
    rep = generator_decay(isotropic(1.0, d), phi, 0.25)
    assert not rep.gated
    assert rep.extra["scaled"][-1] == pytest.approx(phi.integral(), rel=2e-2)
