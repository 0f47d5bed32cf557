import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from stabledom.errors import RejectionError
from stabledom.functions import make_function
from stabledom.kernels import double_cone, isotropic, make_kernel, stable_like
from stabledom.lattice import Lattice
from stabledom.montecarlo import (GridBinning, RadialBinning, _proposals, clock_rate, draw_index, estimate_density,
                                  estimate_semigroup, sample_endpoint, sample_endpoints)
from stabledom.rng import split_seed
from stabledom.semigroup import Field, apply_semigroup
from stabledom.truncation import make_context


@pytest.fixture(scope="module")
def ctx():
    return make_context(isotropic(1.0, 1), 0.5)


def test_draw_layout_is_injective():
    seen = {draw_index(j, a, s) for j in range(1, 4) for a in range(3) for s in range(8)}
    assert len(seen) == 3 * 3 * 8
    assert draw_index(1, 0, 0) > 0


@pytest.mark.parametrize("alpha,d", [(0.5, 1), (1.0, 1), (1.5, 2), (1.2, 3)])
def test_proposal_tail_law(alpha, d):
    # P(|h| > r) = (eps / r)^alpha, so (eps/|h|)^alpha is uniform
    eps = 0.3
    k0, k1 = split_seed(99)
    n = 100_000
    h = _proposals(k0, k1, np.arange(n, dtype=np.int64), np.full(n, draw_index(1, 0, 0), dtype=np.int64),
                   eps, 1.0 / alpha, d)
    r = np.linalg.norm(h, axis=1)
    assert r.min() > eps
    assert stats.kstest((eps / r) ** alpha, "uniform").pvalue > 1e-3
    if d == 2:
        theta = np.arctan2(h[:, 1], h[:, 0]) / (2 * math.pi) % 1.0
        assert stats.kstest(theta, "uniform").pvalue > 1e-3
    if d == 1:
        assert abs(np.mean(h[:, 0] > 0) - 0.5) < 0.01


def test_time_zero_no_moves(ctx):
    b = sample_endpoints(ctx, [0.3], 0.0, 100)
    assert np.all(b.jumps == 0) and np.all(b.endpoints == 0.3)


def test_jump_counts_are_poisson(ctx):
    b = sample_endpoints(ctx, [0.0], 1.0, 50_000, seed=5)
    assert b.rate == ctx.b_bar == pytest.approx(4.0)
    assert abs(b.jumps.mean() - 4.0) < 4 * 2.0 / math.sqrt(50_000)
    assert abs(b.jumps.var() - 4.0) < 0.15


def test_atom_mass_is_zero_event_probability(ctx):
    est = estimate_density(ctx, [0.0], 1.0, 200_000, RadialBinning(np.array([0.0, 1.0, 10.0])), seed=6)
    p = math.exp(-4.0)
    assert abs(est.atom_mass - p) < 4 * math.sqrt(p / 200_000)


def test_determinism_across_workers_and_chunks(ctx):
    a = sample_endpoints(ctx, [0.0], 1.0, 5000, seed=11, workers=1, chunk=5000)
    b = sample_endpoints(ctx, [0.0], 1.0, 5000, seed=11, workers=4, chunk=700)
    assert np.array_equal(a.endpoints, b.endpoints)
    assert np.array_equal(a.jumps, b.jumps)


def test_path_offset_selects_the_same_streams(ctx):
    full = sample_endpoints(ctx, [0.0], 1.0, 300, seed=3)
    part = sample_endpoints(ctx, [0.0], 1.0, 100, seed=3, path_offset=200)
    assert np.array_equal(full.endpoints[200:], part.endpoints)
    single = sample_endpoint(ctx, [0.0], 1.0, seed=3, path_index=250)
    assert np.array_equal(single.endpoint, full.endpoints[250])


def test_seed_changes_paths(ctx):
    a = sample_endpoints(ctx, [0.0], 1.0, 100, seed=1)
    b = sample_endpoints(ctx, [0.0], 1.0, 100, seed=2)
    assert not np.array_equal(a.endpoints, b.endpoints)


def test_rounds_reproduce_the_fast_path(ctx):
    a = sample_endpoints(ctx, [0.0], 1.0, 3000, seed=8)
    b = sample_endpoints(ctx, [0.0], 1.0, 3000, seed=8, force_rounds=True)
    assert np.array_equal(a.endpoints, b.endpoints)


def test_envelope_clock_for_non_invariant_kernels():
    ctx = make_context(stable_like(0.5, 1, 0.5, 1.0), 0.5)
    assert clock_rate(ctx) == pytest.approx(ctx.envelope_rate)
    b = sample_endpoints(ctx, [0.0], 1.0, 20_000, seed=2)
    assert np.all(b.accepted <= b.jumps)
    assert abs(b.jumps.mean() - ctx.envelope_rate) < 5 * math.sqrt(ctx.envelope_rate / 20_000)


def test_understated_envelope_is_rejected():
    ctx = make_context(make_kernel("isotropic", {"alpha": 1.0, "dim": 1}, M=0.5), 0.5)
    with pytest.raises(RejectionError):
        sample_endpoints(ctx, [0.0], 1.0, 100)


def test_cone_directions_stay_in_cone():
    ctx = make_context(double_cone(1.0, 2), 0.5)
    b = sample_endpoints(ctx, [0.0, 0.0], 0.2, 4000, seed=4)
    one = b.moved & (b.accepted == 1)
    h = b.endpoints[one]
    assert np.all(np.abs(h[:, 0]) >= np.abs(h[:, 1]) * (1 - 1e-12))


@pytest.mark.parametrize("kernel", [isotropic(1.0, 1), stable_like(0.5, 1, 0.5, 1.0)], ids=["iso", "stable_like"])
def test_semigroup_cross_validation(kernel):
    ctx = make_context(kernel, 0.25)
    lat = Lattice.centered(1 / 16, 400)
    phi = make_function("indicator", 1, lo=1.0, hi=2.0)
    ref = apply_semigroup(ctx, lat, Field.from_function(lat, phi), 0.5).result.at([0.0])
    mc = estimate_semigroup(ctx, phi, [0.0], 0.5, 100_000, seed=21)
    assert mc.within(ref, 3.0), (mc, ref)


def test_estimate_needs_paths(ctx):
    with pytest.raises(ValueError):
        estimate_semigroup(ctx, make_function("bump", 1), [0.0], 1.0, 10)


def test_density_accounting_and_csv(ctx, tmp_path):
    binning = GridBinning.uniform(-5, 5, 50)
    est = estimate_density(ctx, [0.0], 1.0, 20_000, binning, seed=1)
    assert est.atom_count + est.counts.sum() + est.out_of_range == est.n_paths
    assert np.all(est.density >= 0)
    path = tmp_path / "d.csv"
    est.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# atom_mass,")
    assert lines[1] == "x,density,stderr,count"
    assert len(lines) == 52


def test_density_matches_reference_shape():
    ctx = make_context(isotropic(1.0, 1), 0.05)
    binning = GridBinning.uniform(-3, 3, 30)
    est = estimate_density(ctx, [0.0], 1.0, 100_000, binning, seed=9)
    c = binning.centers()[:, 0]
    ref = (math.pi / math.pi) / (math.pi ** 2 + c ** 2)
    z = (est.density - ref) / np.maximum(est.stderr, 1e-12)
    assert np.mean(np.abs(z) < 3) > 0.9


def test_empty_histogram_warns(ctx):
    with pytest.warns(RuntimeWarning):
        estimate_density(ctx, [0.0], 1e-9, 100, RadialBinning(np.array([0.0, 1.0])))


def test_radial_binning_volumes():
    b = RadialBinning(np.array([0.0, 1.0, 2.0]), dim=2)
    assert np.allclose(b.volumes(), [math.pi, 3 * math.pi])
