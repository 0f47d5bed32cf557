"""Truncated kernel f_eps, intensity b_eps(x) and the uniformization rate b_bar."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import QuadratureError
from .kernels import JumpKernel
from .quadrature import QuadSpec, polar_integral, sphere_area


def _max_width(kernel: JumpKernel) -> float | None:
    return kernel.feature_scale / 4.0 if math.isfinite(kernel.feature_scale) else None


def _tail_bounds(kernel: JumpKernel, r_tail: float) -> tuple[float, float]:
    """Certified interval for the contribution of |h| > r_tail."""
    base = sphere_area(kernel.dim) * r_tail ** (-kernel.alpha) / kernel.alpha
    return min(kernel.modulation_floor, kernel.M) * base, kernel.M * base


def jump_intensity(kernel: JumpKernel, eps: float, x, quad: QuadSpec | None = None,
                   full: bool = False):
    """b_eps(x) = integral of f(x, y) over |y - x| > eps.

    Shell eps < r < R_tail by polar quadrature; the tail beyond R_tail is exact
    for homogeneous kernels and otherwise bracketed by the envelope, returning
    the midpoint. With ``full=True`` also returns the error bar.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    quad = quad or QuadSpec()
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    pts = x.reshape(-1, kernel.dim)
    r_tail = quad.tail_radius(eps)
    width = _max_width(kernel)

    def integrand(xx, yy):
        return kernel.func(np.broadcast_to(xx, yy.shape), yy)

    fine = polar_integral(integrand, pts, eps, r_tail, quad, width, order=quad.order)
    coarse = polar_integral(integrand, pts, eps, r_tail, quad, width, order=quad.coarse_order)
    q_err = np.abs(fine - coarse)
    bad = q_err > quad.rel_tol * np.maximum(np.abs(fine), np.finfo(float).tiny)
    if np.any(bad & (fine != 0)):
        worst = float(np.max(q_err / np.maximum(np.abs(fine), np.finfo(float).tiny)))
        raise QuadratureError(f"relative quadrature error {worst:.3g} exceeds {quad.rel_tol:g} "
                              f"for kernel {kernel.name} at eps={eps:g}")
    if kernel.homogeneous:
        # r^-alpha scaling: shell / total = 1 - (eps/R)^alpha
        value = fine / (-math.expm1(kernel.alpha * math.log(eps / r_tail)))
        err = q_err / (-math.expm1(kernel.alpha * math.log(eps / r_tail)))
    else:
        lo, hi = _tail_bounds(kernel, r_tail)
        value = fine + 0.5 * (lo + hi)
        err = q_err + 0.5 * (hi - lo)
    if single:
        value, err = float(value[0]), float(err[0])
    return (value, err) if full else value


@dataclass(frozen=True)
class TruncationContext:
    """eps together with the uniformization constant b_bar >= sup_x b_eps(x)."""

    kernel: JumpKernel
    eps: float
    b_bar: float
    b_under: float
    quad_spec: QuadSpec
    b_bar_sampled: float = 0.0
    b_error: float = 0.0
    capped: bool = False
    n_samples: int = 1
    cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def dim(self) -> int:
        return self.kernel.dim

    @property
    def alpha(self) -> float:
        return self.kernel.alpha

    @property
    def envelope_rate(self) -> float:
        """A eps^-alpha, the rate of the dominating isotropic jump process."""
        return self.kernel.envelope_constant * self.eps ** (-self.kernel.alpha)

    def to_dict(self) -> dict:
        q = self.quad_spec
        return {
            "kernel": self.kernel.describe(),
            "eps": self.eps,
            "b_bar": self.b_bar,
            "b_under": self.b_under,
            "b_bar_sampled": self.b_bar_sampled,
            "b_error": self.b_error,
            "capped_by_envelope": self.capped,
            "x_samples": self.n_samples,
            "quadrature": {"n_panels": q.n_panels, "order": q.order, "coarse_order": q.coarse_order,
                           "n_angular": q.n_angular, "n_sphere": q.n_sphere,
                           "r_tail": q.tail_radius(self.eps), "rel_tol": q.rel_tol,
                           "safety": q.safety},
        }


def _x_grid(kernel: JumpKernel, quad: QuadSpec) -> np.ndarray:
    d = kernel.dim
    extent = quad.x_extent
    if extent is None:
        extent = max(2.0, kernel.feature_scale if math.isfinite(kernel.feature_scale) else 2.0)
    per_axis = quad.n_x_samples if d == 1 else max(5, int(round(quad.n_x_samples ** (1.0 / d))) + 3)
    axis = np.linspace(-extent, extent, per_axis)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def make_context(kernel: JumpKernel, eps: float, quad: QuadSpec | None = None) -> TruncationContext:
    """Build a truncation context. Translation-invariant kernels get
    b_bar = b_eps(0) exactly; otherwise b_bar is the sampled maximum of the
    upper error bars, inflated by ``quad.safety`` and capped at A eps^-alpha."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    quad = quad or QuadSpec()
    if kernel.translation_invariant:
        val, err = jump_intensity(kernel, eps, np.zeros(kernel.dim), quad, full=True)
        return TruncationContext(kernel, float(eps), b_bar=val, b_under=val, quad_spec=quad,
                                 b_bar_sampled=val, b_error=err)
    xs = _x_grid(kernel, quad)
    val, err = jump_intensity(kernel, eps, xs, quad, full=True)
    sampled = float(np.max(val + err))
    cap = kernel.envelope_constant * eps ** (-kernel.alpha)
    b_bar = min(quad.safety * sampled, cap)
    return TruncationContext(kernel, float(eps), b_bar=b_bar, b_under=float(np.min(val)),
                             quad_spec=quad, b_bar_sampled=sampled, b_error=float(np.max(err)),
                             capped=b_bar == cap, n_samples=len(xs))


def b_eps(ctx: TruncationContext, x, full: bool = False):
    """b_eps(x) for one point (d,) or many (k, d)."""
    if ctx.kernel.translation_invariant:
        x = np.asarray(x, dtype=float)
        if x.ndim <= 1:
            return (ctx.b_bar, ctx.b_error) if full else ctx.b_bar
        k = x.reshape(-1, ctx.dim).shape[0]
        val = np.full(k, ctx.b_bar)
        return (val, np.full(k, ctx.b_error)) if full else val
    return jump_intensity(ctx.kernel, ctx.eps, x, ctx.quad_spec, full=full)


def truncated_eval(ctx: TruncationContext, x, y):
    """f_eps(x, y): zero for |y - x| <= eps, f(x, y) otherwise."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if y.ndim == 0:
        y = y.reshape(1)
    x, y = np.broadcast_arrays(x, y)
    r = np.sqrt(np.sum((y - x) ** 2, axis=-1))
    outside = r > ctx.eps
    out = np.zeros(r.shape)
    if np.any(outside):
        out[outside] = ctx.kernel.func(x[outside], y[outside])
    if out.ndim == 0:
        return float(out)
    return out
