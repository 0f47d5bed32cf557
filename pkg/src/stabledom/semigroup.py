"""Gamma_eps, A_eps and e^{t A_eps} on a lattice, the limit generator on smooth
functions, and the isotropic stable reference density.

Fields carry an exterior value: the region outside the box is treated as one
absorbing state on which phi equals that value. Jumps that leave the box land
there, so the normalized operator P = Gamma/b_bar is exactly stochastic and
constants are preserved.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from .errors import LatticeMismatchError, QuadratureError, ResolutionError, SeriesTruncationError
from .functions import TestFunction
from .kernels import JumpKernel
from .lattice import DiscreteKernel, Lattice, discretize_kernel
from .quadrature import QuadSpec, polar_integral, radial_rule, sphere_area
from .truncation import TruncationContext, jump_intensity


@dataclass(frozen=True)
class Field:
    """Node values on a lattice plus the constant value outside the box."""

    lat: Lattice
    values: np.ndarray = field(repr=False)
    exterior: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.lat.n_nodes,):
            raise LatticeMismatchError(f"field has shape {v.shape}, lattice has {self.lat.n_nodes} nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, lat: Lattice, phi: TestFunction, average: bool = True) -> "Field":
        """Cell averages (default) or point samples of phi."""
        if phi.dim != lat.dim:
            raise LatticeMismatchError("function and lattice dimensions differ")
        vals = phi.cell_average(lat.points, lat.h) if average else phi.value(lat.points)
        return cls(lat, vals, float(phi.exterior))

    @classmethod
    def constant(cls, lat: Lattice, c: float) -> "Field":
        return cls(lat, np.full(lat.n_nodes, float(c)), float(c))

    def sup(self) -> float:
        return float(max(np.max(np.abs(self.values)), abs(self.exterior)))

    def at(self, x) -> float:
        return float(self.values[self.lat.index_of(x)])

    def with_values(self, values, exterior=None) -> "Field":
        return Field(self.lat, values, self.exterior if exterior is None else exterior)


def _dk(ctx, lat, dk):
    if dk is not None:
        if dk.lat != lat or dk.ctx is not ctx:
            raise LatticeMismatchError("discrete kernel built for another lattice or context")
        return dk
    return discretize_kernel(ctx, lat)


def _check(lat: Lattice, phi: Field):
    if phi.lat != lat:
        raise LatticeMismatchError("field lives on a different lattice")


def apply_gamma(ctx: TruncationContext, lat: Lattice, phi: Field,
                dk: DiscreteKernel | None = None, rate: float | None = None) -> Field:
    """Gamma phi = K phi + leak * exterior + (rate - b - excess) phi, rate = b_bar by default."""
    _check(lat, phi)
    dk = _dk(ctx, lat, dk)
    rate = ctx.b_bar if rate is None else rate
    if rate < ctx.b_bar:
        raise ValueError("uniformization rate must be at least b_bar")
    self_rate = dk.self_rate + (rate - ctx.b_bar)
    vals = dk.K @ phi.values + dk.leak * phi.exterior + self_rate * phi.values
    return phi.with_values(vals, rate * phi.exterior)


def apply_generator(ctx: TruncationContext, lat: Lattice, phi: Field,
                    dk: DiscreteKernel | None = None) -> Field:
    """A_eps phi = Gamma phi - b_bar phi (exterior is absorbing, so A_eps maps it to 0)."""
    g = apply_gamma(ctx, lat, phi, dk)
    return phi.with_values(g.values - ctx.b_bar * phi.values, 0.0)


def poisson_window(lam: float, tol: float) -> tuple[int, np.ndarray, float]:
    """Smallest index window [lo, hi] holding all but ``tol`` of Poisson(lam).

    Returns (lo, weights for lo..hi, neglected mass). Weights come from the
    ratio recurrence run outward from the mode, anchored at the log pmf there.
    """
    if lam == 0:
        return 0, np.array([1.0]), 0.0
    lo = int(stats.poisson.ppf(0.5 * tol, lam))
    hi = int(stats.poisson.isf(0.5 * tol, lam))
    lo = max(lo - 1, 0)
    mode = int(math.floor(lam))
    mode = min(max(mode, lo), hi)
    log_pm = -lam + mode * math.log(lam) - special.gammaln(mode + 1)
    w = np.empty(hi - lo + 1)
    w[mode - lo] = math.exp(log_pm)
    for k in range(mode + 1, hi + 1):
        w[k - lo] = w[k - 1 - lo] * lam / k
    for k in range(mode - 1, lo - 1, -1):
        w[k - lo] = w[k + 1 - lo] * (k + 1) / lam
    neglected = float(stats.poisson.cdf(lo - 1, lam) + stats.poisson.sf(hi, lam)) if lo > 0 \
        else float(stats.poisson.sf(hi, lam))
    # the anchor carries a relative error ~ lam * 1e-16; the ratios do not
    w *= (1.0 - neglected) / math.fsum(w)
    return lo, w, neglected


@dataclass(frozen=True)
class SemigroupEvaluation:
    ctx: TruncationContext
    lat: Lattice
    t: float
    n_terms: int
    tail: float
    rate: float
    phi: Field = field(repr=False)
    result: Field = field(repr=False)

    def to_csv(self, path) -> None:
        coords = ["x"] if self.lat.dim == 1 else ["x1", "x2"]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["node"] + coords + ["phi", "value"])
            for i, (p, a, b) in enumerate(zip(self.lat.points, self.phi.values, self.result.values)):
                wr.writerow([i] + [format(c, ".17g") for c in p] + [format(a, ".17g"), format(b, ".17g")])


def apply_semigroup(ctx: TruncationContext, lat: Lattice, phi: Field, t: float,
                    tol: float = 1e-10, max_terms: int = 100_000,
                    dk: DiscreteKernel | None = None, rate: float | None = None) -> SemigroupEvaluation:
    """e^{t A_eps} phi = sum_n pois(n; t*rate) P^n phi with P = Gamma/rate."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    _check(lat, phi)
    dk = _dk(ctx, lat, dk)
    rate = ctx.b_bar if rate is None else float(rate)
    if t == 0 or rate == 0:
        return SemigroupEvaluation(ctx, lat, t, 1, 0.0, rate, phi, phi)
    lam = t * rate
    lo, w, neglected = poisson_window(lam, tol)
    hi = lo + len(w) - 1
    if hi + 1 > max_terms:
        raise SeriesTruncationError(f"uniformization series needs {hi + 1} terms (cap {max_terms})")
    # P = (K + diag(self)) / rate acting on node values; the exterior value is a fixed point
    self_rate = (dk.self_rate + (rate - ctx.b_bar)) / rate
    Kn = dk.K / rate
    leak_in = dk.leak / rate * phi.exterior
    v = phi.values.copy()
    acc = np.zeros_like(v)
    for n in range(hi + 1):
        if n >= lo:
            acc += w[n - lo] * v
        if n < hi:
            v = Kn @ v + leak_in + self_rate * v
    result = phi.with_values(acc, phi.exterior)
    return SemigroupEvaluation(ctx, lat, t, hi + 1, neglected, rate, phi, result)


# -------------------------------------------------------------- limit generator


@dataclass(frozen=True)
class LimitGeneratorResult:
    eps: np.ndarray
    points: np.ndarray
    values: np.ndarray      # A_eps phi(x), shape (len(eps), len(points))
    limit: np.ndarray       # extrapolated A phi(x), shape (len(points),)
    errors: np.ndarray      # sup over points of |A phi - A_eps phi|, per eps
    slope: float
    expected_slope: float | None


def _shell_generator(kernel: JumpKernel, phi: TestFunction, x: np.ndarray, r_lo: float,
                     r_hi: float, quad: QuadSpec) -> np.ndarray:
    width = kernel.feature_scale / 4.0 if math.isfinite(kernel.feature_scale) else None
    if phi.smooth and math.isfinite(phi.support_radius()) and phi.support_radius() > 0:
        width = min(width or math.inf, phi.support_radius() / 8.0)
    phx = {}

    def integrand(xx, yy):
        xb = np.broadcast_to(xx, yy.shape)
        key = id(xx)
        if key not in phx:
            phx[key] = phi.value(xx)
        return (phi.value(yy) - phx[key]) * kernel.func(xb, yy)

    return polar_integral(integrand, x, r_lo, r_hi, quad, width)


def truncated_generator(kernel: JumpKernel, phi: TestFunction, x, eps: float,
                        quad: QuadSpec | None = None) -> np.ndarray:
    """A_eps phi(x) = integral over |h| > eps of (phi(x+h) - phi(x)) f(x, x+h) dh.

    Beyond R_phi (where phi equals its exterior value) the integrand is
    (exterior - phi(x)) f, which integrates to (exterior - phi(x)) b_{R_phi}(x).
    """
    quad = quad or QuadSpec()
    x = np.atleast_2d(np.asarray(x, dtype=float))
    reach = float(np.max(np.linalg.norm(x - phi.center, axis=1)) + phi.support_radius())
    r_phi = max(reach, 2.0 * eps) if math.isfinite(reach) else quad.tail_radius(eps)
    inner = _shell_generator(kernel, phi, x, eps, r_phi, quad)
    outer_rate = jump_intensity(kernel, r_phi, x, quad)
    return inner + (phi.exterior - phi.value(x)) * np.atleast_1d(outer_rate)


def _small_ball_moments(kernel: JumpKernel, x: np.ndarray, delta: float, quad: QuadSpec):
    """m1 = int_{|h|<delta} h f(x,x+h) dh and m2 = int h h^T f dh, per point."""
    d = kernel.dim
    dirs, wdir = quad.directions(d)
    r0 = delta * 1e-8
    r, wr = radial_rule(r0, delta, quad.n_panels, quad.order)
    m1 = np.zeros((len(x), d))
    m2 = np.zeros((len(x), d, d))
    for i, xi in enumerate(x):
        pts = xi[None, None, :] + r[:, None, None] * dirs[None, :, :]
        f = kernel.func(np.broadcast_to(xi, pts.shape), pts)  # (q, m)
        # analytic piece on (0, r0): f ~ f(r0) (r0/r)^(alpha+d)
        f0 = kernel.func(np.broadcast_to(xi, (len(dirs), d)), xi + r0 * dirs)
        s1 = (wr * r ** d) @ f + f0 * r0 ** (kernel.alpha + d) * r0 ** (1 - kernel.alpha) / (1 - kernel.alpha) \
            if kernel.alpha < 1 else (wr * r ** d) @ f
        s2 = (wr * r ** (d + 1)) @ f + f0 * r0 ** (kernel.alpha + d) * r0 ** (2 - kernel.alpha) / (2 - kernel.alpha)
        m1[i] = (s1 * wdir) @ dirs
        m2[i] = np.einsum("m,mi,mj->ij", s2 * wdir, dirs, dirs)
    return m1, m2


def apply_limit_generator(kernel: JumpKernel, phi: TestFunction, x, eps_sweep,
                          quad: QuadSpec | None = None, delta_factor: float = 1e-2) -> LimitGeneratorResult:
    """A_eps phi(x) along an eps sweep and the eps -> 0 limit.

    The limit is A_delta phi(x) plus a second-order Taylor expansion of phi on
    the ball |h| < delta (delta = delta_factor * min eps); the slope is the
    least-squares fit of log sup_x |A phi - A_eps phi| against log eps.
    """
    if not phi.smooth:
        raise ValueError("the limit generator needs a smooth test function")
    if not kernel.sym_h and kernel.alpha >= 1:
        raise ValueError("kernel needs reflection symmetry or alpha < 1")
    eps = np.asarray(sorted(eps_sweep, reverse=True), dtype=float)
    if len(eps) < 4:
        raise ValueError("need at least 4 eps values to fit a convergence order")
    quad = quad or QuadSpec()
    x = np.atleast_2d(np.asarray(x, dtype=float))
    values = np.stack([truncated_generator(kernel, phi, x, e, quad) for e in eps])
    delta = delta_factor * float(eps.min())
    base = truncated_generator(kernel, phi, x, delta, quad)
    m1, m2 = _small_ball_moments(kernel, x, delta, quad)
    grad = phi.grad(x)
    hess = phi.hessian(x)
    correction = 0.5 * np.einsum("kij,kij->k", hess, m2)
    if not kernel.sym_h:
        correction = correction + np.einsum("ki,ki->k", grad, m1)
    limit = base + correction
    errors = np.max(np.abs(values - limit[None, :]), axis=1)
    good = errors > 0
    if good.sum() >= 2:
        slope = float(np.polyfit(np.log(eps[good]), np.log(errors[good]), 1)[0])
    else:
        slope = math.nan
    if kernel.sym_h:
        expected = 2.0 - kernel.alpha
    else:
        expected = 1.0 - kernel.alpha
    return LimitGeneratorResult(eps, x, values, limit, errors, slope, expected)


# ------------------------------------------------------------- reference density


def radial_cosine_constant(alpha: float) -> float:
    """int_0^inf (1 - cos s) s^(-alpha-1) ds by quadrature.

    Series on (0, s0), log-panel Gauss-Legendre on (s0, S) and Fourier-weighted
    QUADPACK for the cosine tail beyond S."""
    s0, S = 1e-3, 200.0
    # 1 - cos s = s^2/2 - s^4/24 + s^6/720 - ...
    head = sum((-1) ** (k + 1) * s0 ** (2 * k - alpha) / (math.factorial(2 * k) * (2 * k - alpha))
               for k in range(1, 6))
    r, w = radial_rule(s0, S, 64, 8, max_width=0.25)
    body = float(np.sum(w * (1.0 - np.cos(r)) * r ** (-alpha - 1.0)))
    plain = S ** -alpha / alpha
    cos_tail, err = integrate.quad(lambda s: s ** (-alpha - 1.0), S, np.inf, weight="cos", wvar=1.0,
                                  epsabs=1e-15, limlst=200)
    if err > 1e-12:
        raise QuadratureError(f"cosine tail quadrature error {err:.3g}")
    return head + body + plain - cos_tail


def stable_symbol_constant(alpha: float, d: int) -> float:
    """c_{d,alpha} = int (1 - cos<e1, h>) |h|^(-alpha-d) dh."""
    rad = radial_cosine_constant(alpha)
    if d == 1:
        ang = 2.0
    elif d == 2:
        ang = 4.0 * integrate.quad(lambda p: math.cos(p) ** alpha, 0.0, 0.5 * math.pi, epsrel=1e-13)[0]
    else:
        # integral of |theta_1|^alpha over S^{d-1} through the Beta function
        ang = sphere_area(d - 1) * special.beta(0.5 * (alpha + 1), 0.5 * (d - 1))
    return ang * rad


_SYMBOL_CACHE: dict[tuple[float, int], float] = {}


def reference_density(alpha: float, d: int, t: float, x, tol: float = 1e-9) -> np.ndarray | float:
    """Transition density of the isotropic stable process with Levy density
    |h|^(-alpha-d), by Fourier inversion of exp(-t c |xi|^alpha)."""
    if d not in (1, 2):
        raise ValueError("reference density is available for d = 1, 2")
    if t <= 0:
        raise ValueError("t must be positive")
    key = (float(alpha), int(d))
    if key not in _SYMBOL_CACHE:
        _SYMBOL_CACHE[key] = stable_symbol_constant(alpha, d)
    c = _SYMBOL_CACHE[key]
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0 or (x.ndim == 1 and d > 1 and x.shape == (d,)) or (d == 1 and x.shape == (1,))
    pts = x.reshape(-1, d)
    r = np.linalg.norm(pts, axis=1)
    tc = t * c
    cutoff = (60.0 / tc) ** (1.0 / alpha)
    out = np.empty(len(r))
    for i, ri in enumerate(r):
        if d == 1:
            if ri == 0:
                val, err = integrate.quad(lambda s: math.exp(-tc * s ** alpha), 0.0, cutoff,
                                          epsabs=0.0, epsrel=1e-12, limit=400)
            else:
                with warnings.catch_warnings():
                    # cancellation at large |x|; the returned error estimate is checked below
                    warnings.simplefilter("ignore", integrate.IntegrationWarning)
                    val, err = integrate.quad(lambda s: math.exp(-tc * s ** alpha), 0.0, cutoff,
                                              weight="cos", wvar=ri, epsabs=1e-16, epsrel=1e-12, limit=400)
            val /= math.pi
            err /= math.pi
        else:
            brk = [] if ri == 0 else list(np.arange(1, int(cutoff * ri / math.pi) + 1) * math.pi / ri)[:200]
            fn = (lambda s: special.j0(s * ri) * math.exp(-tc * s ** alpha) * s)
            val, err = 0.0, 0.0
            edges = [0.0] + [b for b in brk if b < cutoff] + [cutoff]
            for lo, hi in zip(edges[:-1], edges[1:]):
                v, e = integrate.quad(fn, lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)
                val += v
                err += e
            val /= 2.0 * math.pi
            err /= 2.0 * math.pi
        if err > tol * max(abs(val), 1e-300) and err > 1e-14:
            raise ResolutionError(f"density inversion error {err:.3g} at |x|={ri:g}")
        out[i] = val
    return float(out[0]) if scalar else out
