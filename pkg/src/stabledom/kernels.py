"""Jump kernels f(x, y) dominated by the isotropic stable density M|y-x|^(-alpha-d).

A kernel is a frozen dataclass wrapping a vectorised evaluator ``func(x, y)``
that accepts broadcastable arrays of shape (..., d) and returns (...). The
declared constants M (upper envelope) and a (lower bound on the truncated
intensity times eps^alpha) are checked by :func:`verify_assumptions`, never
inferred.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.special import betainc
from scipy.stats import norm, qmc

from .errors import CoincidentPointsError, ConfigError
from .quadrature import QuadSpec, sphere_area
from .reports import BoundReport

KernelFunc = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class JumpKernel:
    """Jump intensity with its structural constants.

    ``homogeneous`` means f(x, x + r*theta) = g(theta) r^(-alpha-d) with g
    independent of x, which lets the truncation module integrate the radial
    tail exactly. ``exact_envelope`` means f equals M times the isotropic
    envelope (rejection sampling always accepts). ``modulation_floor`` is a
    declared lower bound on f|y-x|^(alpha+d), used only to tighten the tail
    error bar. ``feature_scale`` is the shortest length on which f oscillates
    (inf if it does not).
    """

    name: str
    dim: int
    alpha: float
    func: KernelFunc = field(compare=False, repr=False)
    M: float
    a: float
    sym_h: bool
    sym_xy: bool
    translation_invariant: bool
    homogeneous: bool = False
    exact_envelope: bool = False
    modulation_floor: float = 0.0
    feature_scale: float = math.inf
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise ConfigError(f"dim must be a positive integer, got {self.dim!r}")
        if not 0.0 < self.alpha < 2.0:
            raise ConfigError(f"alpha must lie in (0, 2), got {self.alpha}")
        if not self.sym_h and self.alpha >= 1.0:
            raise ConfigError("kernels without f(x,x+h)=f(x,x-h) symmetry need alpha < 1")
        if self.M < 0 or self.a < 0:
            raise ConfigError("M and a must be nonnegative")

    @property
    def envelope_constant(self) -> float:
        """A = M * |S^{d-1}| / alpha, so that b_eps(x) <= A eps^-alpha."""
        return self.M * sphere_area(self.dim) / self.alpha

    def __call__(self, x, y):
        return evaluate(self, x, y)

    def describe(self) -> dict:
        return {"name": self.name, "dim": int(self.dim), "alpha": float(self.alpha),
                "M": float(self.M), "a": float(self.a), "params": dict(self.params)}


def evaluate(kernel: JumpKernel, x, y):
    """f(x, y) for points (or broadcastable arrays of points) with x != y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if y.ndim == 0:
        y = y.reshape(1)
    if x.shape[-1] != kernel.dim or y.shape[-1] != kernel.dim:
        raise ValueError(f"points must have trailing dimension {kernel.dim}")
    if np.any(np.all(x == y, axis=-1)):
        raise CoincidentPointsError("jump kernel evaluated on the diagonal x == y")
    out = kernel.func(x, y)
    if np.ndim(out) == 0:
        return float(out)
    return out


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 2.0:
        raise ConfigError(f"alpha must lie in (0, 2), got {alpha}")


def _radius(x, y):
    return np.sqrt(np.sum((y - x) ** 2, axis=-1))


def isotropic(alpha: float, dim: int = 1, scale: float = 1.0) -> JumpKernel:
    """f(x, y) = scale * |y-x|^(-alpha-d), the rotation invariant stable Levy density."""
    _check_alpha(alpha)
    p = alpha + dim

    def func(x, y):
        with np.errstate(divide="ignore"):
            return scale * _radius(x, y) ** (-p)

    return JumpKernel("isotropic", dim, alpha, func, M=scale,
                      a=scale * sphere_area(dim) / alpha, sym_h=True, sym_xy=True,
                      translation_invariant=True, homogeneous=True, exact_envelope=True,
                      modulation_floor=scale,
                      params={"alpha": alpha, "dim": dim, "scale": scale})


def cap_measure(dim: int, half_angle: float) -> float:
    """Surface measure of {theta in S^{d-1}: <theta, v> >= cos(half_angle)}."""
    if dim == 1:
        return 1.0
    psi = min(max(half_angle, 0.0), math.pi)
    s = sphere_area(dim)
    if dim == 2:
        return 2.0 * psi
    # regularized incomplete beta form of the spherical cap
    if psi <= math.pi / 2:
        return 0.5 * s * betainc(0.5 * (dim - 1), 0.5, math.sin(psi) ** 2)
    return s - 0.5 * s * betainc(0.5 * (dim - 1), 0.5, math.sin(psi) ** 2)


def double_cone(alpha: float, dim: int = 2, direction=None, half_angle: float = math.pi / 4,
                scale: float = 1.0) -> JumpKernel:
    """Isotropic density restricted to jump directions within ``half_angle`` of +-direction."""
    _check_alpha(alpha)
    v = np.zeros(dim) if direction is None else np.asarray(direction, dtype=float).reshape(dim)
    if direction is None:
        v[0] = 1.0
    v = v / np.linalg.norm(v)
    cos_psi = math.cos(half_angle)
    p = alpha + dim

    def func(x, y):
        h = y - x
        r = np.sqrt(np.sum(h * h, axis=-1))
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.abs(h @ v) / r
            return np.where(c >= cos_psi - 1e-14, scale * r ** (-p), 0.0)

    # the double cap V u (-V) covers the whole sphere once the half angle reaches pi/2
    cone = min(2.0 * cap_measure(dim, half_angle), sphere_area(dim))
    return JumpKernel("double_cone", dim, alpha, func, M=scale, a=scale * cone / alpha,
                      sym_h=True, sym_xy=True, translation_invariant=True, homogeneous=True,
                      exact_envelope=False, modulation_floor=0.0,
                      params={"alpha": alpha, "dim": dim, "direction": v.tolist(),
                              "half_angle": half_angle, "scale": scale})


def stable_like(alpha: float, dim: int = 1, eta: float = 0.5, u=1.0) -> JumpKernel:
    """f(x, y) = (1 + eta sin<u,x> sin<u,y>) |y-x|^(-alpha-d); symmetric in (x, y) only."""
    _check_alpha(alpha)
    if not 0.0 < eta < 1.0:
        raise ConfigError(f"eta must lie in (0, 1), got {eta}")
    uv = np.asarray(u, dtype=float)
    if uv.ndim == 0:
        uv = np.concatenate([[float(uv)], np.zeros(dim - 1)])
    uv = uv.reshape(dim)
    if not np.any(uv):
        raise ConfigError("u must be nonzero")
    p = alpha + dim

    def func(x, y):
        mod = 1.0 + eta * np.sin(x @ uv) * np.sin(y @ uv)
        with np.errstate(divide="ignore"):
            return mod * _radius(x, y) ** (-p)

    return JumpKernel("stable_like", dim, alpha, func, M=1.0 + eta,
                      a=(1.0 - eta) * sphere_area(dim) / alpha, sym_h=False, sym_xy=True,
                      translation_invariant=False, homogeneous=False, exact_envelope=False,
                      modulation_floor=1.0 - eta,
                      feature_scale=2.0 * math.pi / float(np.linalg.norm(uv)),
                      params={"alpha": alpha, "dim": dim, "eta": eta, "u": uv.tolist()})


def scaled(kernel: JumpKernel, c: float) -> JumpKernel:
    """c * f with constants scaled accordingly; c = 0 gives the zero kernel."""
    if c < 0:
        raise ConfigError("scale factor must be nonnegative")
    inner = kernel.func

    def func(x, y):
        return c * inner(x, y)

    return replace(kernel, name=f"{kernel.name}*{c:g}", func=func, M=c * kernel.M,
                   a=c * kernel.a, modulation_floor=c * kernel.modulation_floor,
                   exact_envelope=kernel.exact_envelope and c > 0,
                   params={**kernel.params, "scaled_by": c})


_REGISTRY: dict[str, Callable[..., JumpKernel]] = {
    "isotropic": isotropic,
    "double_cone": double_cone,
    "stable_like": stable_like,
}


def register_kernel(name: str, factory: Callable[..., JumpKernel]) -> None:
    _REGISTRY[name] = factory


def available_kernels() -> list[str]:
    return sorted(_REGISTRY)


def make_kernel(name: str, params: dict | None = None, M: float | None = None,
                a: float | None = None) -> JumpKernel:
    """Build a registered kernel; ``M``/``a`` override the declared constants
    (used to test that understated constants are caught)."""
    if name not in _REGISTRY:
        raise ConfigError(f"unknown kernel {name!r}; known: {available_kernels()}")
    params = dict(params or {})
    scale = params.pop("scale_by", None)
    try:
        kernel = _REGISTRY[name](**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for kernel {name!r}: {exc}") from exc
    if scale is not None:
        kernel = scaled(kernel, float(scale))
    overrides = {}
    if M is not None:
        overrides["M"] = float(M)
        overrides["exact_envelope"] = kernel.exact_envelope and float(M) == kernel.M
    if a is not None:
        overrides["a"] = float(a)
    return replace(kernel, **overrides) if overrides else kernel


# ---------------------------------------------------------------- verification


@dataclass(frozen=True)
class SamplingPlan:
    """Finite sample set standing in for the quantifiers over R^d."""

    n_base: int = 32
    extent: float = 2.0
    n_offsets: int = 64
    r_min: float = 1e-3
    r_max: float = 1e2
    eps_values: tuple = tuple(2.0 ** -k for k in range(7))
    n_intensity_points: int = 8
    continuity_step: float = 1e-6
    symmetry_tol: float = 1e-12
    continuity_tol: float = 1e-3
    envelope_slack: float = 1e-12

    def base_points(self, d: int) -> np.ndarray:
        pts = qmc.Halton(d, scramble=False).random(self.n_base + 1)[1:]
        return self.extent * (2.0 * pts - 1.0)

    def offsets(self, d: int) -> np.ndarray:
        radii = np.geomspace(self.r_min, self.r_max, self.n_offsets)
        if d == 1:
            signs = np.where(np.arange(self.n_offsets) % 2 == 0, 1.0, -1.0)
            return (radii * signs)[:, None]
        g = norm.ppf(qmc.Halton(d, scramble=False).random(self.n_offsets + 1)[1:].clip(1e-9, 1 - 1e-9))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return radii[:, None] * g


def _rel_defect(u, v):
    scale = np.maximum(np.maximum(np.abs(u), np.abs(v)), np.finfo(float).tiny)
    return np.abs(u - v) / scale


def verify_assumptions(kernel: JumpKernel, plan: SamplingPlan | None = None,
                       quad: QuadSpec | None = None) -> BoundReport:
    """Check the envelope, symmetry, lower-intensity and continuity conditions
    on the sample set. ``fitted_constant`` of each sub-report is the tightest
    empirical constant (largest M needed, smallest a observed)."""
    from .truncation import jump_intensity

    plan = plan or SamplingPlan()
    quad = quad or QuadSpec()
    d = kernel.dim
    xs = plan.base_points(d)
    hs = plan.offsets(d)
    X = np.repeat(xs, len(hs), axis=0)
    H = np.tile(hs, (len(xs), 1))
    Y = X + H
    r = np.linalg.norm(H, axis=1)
    f = kernel.func(X, Y)
    children = []

    # envelope
    scaled_f = f * r ** (kernel.alpha + d)
    fitted_M = float(scaled_f.max())
    if kernel.M > 0:
        ratio = fitted_M / kernel.M
    else:
        ratio = 0.0 if fitted_M == 0 else math.inf
    neg = bool(np.any(f < 0)) or not np.all(np.isfinite(f))
    env = BoundReport("stable envelope", passed=(ratio <= 1 + plan.envelope_slack) and not neg,
                      worst_ratio=ratio, fitted_constant=fitted_M,
                      configurations=[{"pairs": int(len(f)), "declared_M": kernel.M}])
    if neg:
        env.notes.append("negative or non-finite kernel values")
    children.append(env)

    # h -> -h symmetry
    f_minus = kernel.func(X, X - H)
    defect_h = float(_rel_defect(f, f_minus).max())
    if kernel.sym_h:
        children.append(BoundReport("reflection symmetry", passed=defect_h <= plan.symmetry_tol,
                                    worst_ratio=defect_h / plan.symmetry_tol,
                                    fitted_constant=defect_h))
    else:
        children.append(BoundReport("reflection symmetry", passed=kernel.alpha < 1.0,
                                    worst_ratio=0.0 if kernel.alpha < 1 else math.inf,
                                    fitted_constant=defect_h,
                                    notes=["kernel not reflection symmetric; alpha < 1 branch"]))

    # x <-> y symmetry
    f_swap = kernel.func(Y, X)
    defect_xy = float(_rel_defect(f, f_swap).max())
    if kernel.sym_xy:
        children.append(BoundReport("exchange symmetry", passed=defect_xy <= plan.symmetry_tol,
                                    worst_ratio=defect_xy / plan.symmetry_tol,
                                    fitted_constant=defect_xy))
    else:
        children.append(BoundReport("exchange symmetry", passed=True, gated=False,
                                    fitted_constant=defect_xy, notes=["not declared"]))

    # lower intensity: a <= b_eps(x) eps^alpha, using the upper end of the error bar
    pts = xs[:1] if kernel.translation_invariant else xs[:plan.n_intensity_points]
    lowest = math.inf
    for eps in plan.eps_values:
        val, err = jump_intensity(kernel, eps, pts, quad, full=True)
        lowest = min(lowest, float(np.min((val + err) * eps ** kernel.alpha)))
    if kernel.a > 0:
        ratio_a = kernel.a / lowest if lowest > 0 else math.inf
    else:
        ratio_a = 0.0
    children.append(BoundReport("lower intensity", passed=ratio_a <= 1 + quad.rel_tol,
                                worst_ratio=ratio_a, fitted_constant=lowest,
                                configurations=[{"eps": list(plan.eps_values), "points": int(len(pts)),
                                                 "declared_a": kernel.a}]))

    # continuity in x off the diagonal, step proportional to |y - x|
    rng_dirs = plan.offsets(d)[::-1] / np.linalg.norm(plan.offsets(d)[::-1], axis=1, keepdims=True)
    step = plan.continuity_step * r[:, None] * np.tile(rng_dirs, (len(xs), 1))
    f_shift = kernel.func(X + step, Y)
    defect_c = float(_rel_defect(f, f_shift).max())
    cont = BoundReport("continuity", passed=defect_c <= plan.continuity_tol,
                       worst_ratio=defect_c / plan.continuity_tol, fitted_constant=defect_c,
                       notes=["smoke test on sampled pairs only"])
    children.append(cont)

    return BoundReport.combine(f"assumptions[{kernel.name}]", children,
                               configurations=[kernel.describe()])
