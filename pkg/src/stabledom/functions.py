"""Test functions phi with analytic value, derivatives, integrals and cell averages."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .errors import ConfigError
from .quadrature import gauss_legendre


def _pts(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != d:
        raise ValueError(f"expected trailing dimension {d}, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class TestFunction:
    """Base class. ``exterior`` is the value far away (0 for decaying functions)."""

    dim: int
    exterior: float = field(default=0.0, init=False)

    name = "function"
    smooth = False
    __test__ = False  # not a pytest class despite the name

    def __call__(self, x):
        return self.value(x)

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError(f"{self.name} has no analytic gradient")

    def hessian(self, x):
        raise NotImplementedError(f"{self.name} has no analytic Hessian")

    def integral(self) -> float:
        raise NotImplementedError

    def support_radius(self) -> float:
        """Radius around ``center`` beyond which phi equals its exterior value
        to double precision."""
        return math.inf

    @property
    def center(self) -> np.ndarray:
        return np.zeros(self.dim)

    def contains(self, x) -> np.ndarray:
        """True where x lies in the (closed) support of phi - exterior."""
        return np.asarray(self.value(x)) != self.exterior

    def cell_average(self, nodes: np.ndarray, h: float, order: int = 6) -> np.ndarray:
        """Mean of phi over the cubes of side h centred at ``nodes`` (k, d)."""
        nodes = _pts(nodes, self.dim)
        gx, gw = gauss_legendre(order)
        offs = (gx - 0.5) * h
        mesh = np.meshgrid(*([offs] * self.dim), indexing="ij")
        wmesh = np.meshgrid(*([gw] * self.dim), indexing="ij")
        sub = np.stack([m.ravel() for m in mesh], axis=1)
        wsub = np.prod(np.stack([m.ravel() for m in wmesh], axis=1), axis=1)
        out = np.empty(len(nodes))
        step = max(1, 2_000_000 // len(sub))
        for s in range(0, len(nodes), step):
            vals = self.value(nodes[s:s + step, None, :] + sub[None, :, :])
            out[s:s + step] = vals @ wsub
        return out

    def describe(self) -> dict:
        return {"name": self.name, "dim": self.dim}


@dataclass(frozen=True)
class Gaussian(TestFunction):
    """height * exp(-|x - c|^2 / (2 width^2))."""

    center_: tuple = (0.0,)
    width: float = 1.0
    height: float = 1.0
    name = "gaussian"
    smooth = True

    @property
    def center(self):
        return np.asarray(self.center_, dtype=float)

    def value(self, x):
        x = _pts(x, self.dim)
        r2 = np.sum((x - self.center) ** 2, axis=-1)
        return self.height * np.exp(-0.5 * r2 / self.width ** 2)

    def grad(self, x):
        x = _pts(x, self.dim)
        return -(x - self.center) / self.width ** 2 * self.value(x)[..., None]

    def hessian(self, x):
        x = _pts(x, self.dim)
        z = (x - self.center) / self.width ** 2
        eye = np.eye(self.dim) / self.width ** 2
        return (z[..., :, None] * z[..., None, :] - eye) * self.value(x)[..., None, None]

    def integral(self):
        return self.height * (2.0 * math.pi * self.width ** 2) ** (0.5 * self.dim)

    def support_radius(self):
        return 40.0 * self.width  # exp(-800) underflows to zero

    def cell_average(self, nodes, h, order=6):
        nodes = _pts(nodes, self.dim)
        s = self.width * math.sqrt(2.0)
        lo = (nodes - 0.5 * h - self.center) / s
        hi = (nodes + 0.5 * h - self.center) / s
        per_axis = 0.5 * (erf(hi) - erf(lo)) * s * math.sqrt(math.pi) / h
        return self.height * np.prod(per_axis, axis=-1)

    def contains(self, x):
        return np.ones(np.shape(_pts(x, self.dim))[:-1], dtype=bool)

    def describe(self):
        return {"name": self.name, "dim": self.dim, "center": list(self.center_),
                "width": self.width, "height": self.height}


@dataclass(frozen=True)
class Indicator(TestFunction):
    """height on the box [lo, hi] (per axis), 0 elsewhere."""

    lo: tuple = (0.0,)
    hi: tuple = (1.0,)
    height: float = 1.0
    name = "indicator"

    @property
    def center(self):
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    def value(self, x):
        x = _pts(x, self.dim)
        inside = np.all((x >= np.asarray(self.lo)) & (x <= np.asarray(self.hi)), axis=-1)
        return np.where(inside, self.height, 0.0)

    def integral(self):
        return self.height * float(np.prod(np.asarray(self.hi) - np.asarray(self.lo)))

    def support_radius(self):
        return 0.5 * float(np.linalg.norm(np.asarray(self.hi) - np.asarray(self.lo)))

    def cell_average(self, nodes, h, order=6):
        nodes = _pts(nodes, self.dim)
        a = np.maximum(nodes - 0.5 * h, np.asarray(self.lo))
        b = np.minimum(nodes + 0.5 * h, np.asarray(self.hi))
        return self.height * np.prod(np.clip(b - a, 0.0, None) / h, axis=-1)

    def describe(self):
        return {"name": self.name, "dim": self.dim, "lo": list(self.lo), "hi": list(self.hi),
                "height": self.height}


@dataclass(frozen=True)
class SmoothBump(TestFunction):
    """height * exp(1 - 1/(1 - |x-c|^2/radius^2)) inside the ball, 0 outside (peak = height)."""

    center_: tuple = (0.0,)
    radius: float = 1.0
    height: float = 1.0
    name = "bump"
    smooth = True

    @property
    def center(self):
        return np.asarray(self.center_, dtype=float)

    def _s(self, x):
        x = _pts(x, self.dim)
        return np.sum((x - self.center) ** 2, axis=-1) / self.radius ** 2

    def value(self, x):
        s = self._s(x)
        with np.errstate(divide="ignore", over="ignore"):
            inner = np.exp(1.0 - 1.0 / np.where(s < 1, 1.0 - s, 1.0))
        return np.where(s < 1, self.height * inner, 0.0)

    def grad(self, x):
        x = _pts(x, self.dim)
        s = self._s(x)
        u = np.where(s < 1, 1.0 - s, 1.0)
        # d/dx exp(1 - 1/u) = exp(...) * (-1/u^2) * (-du/dx), du/dx = -2(x-c)/R^2
        fac = np.where(s < 1, -2.0 / (u ** 2 * self.radius ** 2), 0.0) * self.value(x)
        return fac[..., None] * (x - self.center)

    def hessian(self, x):
        x = _pts(x, self.dim)
        s = self._s(x)
        inside = s < 1
        u = np.where(inside, 1.0 - s, 1.0)
        R2 = self.radius ** 2
        z = x - self.center
        v = self.value(x)
        # phi = exp(1 - 1/u); grad = g(u) z with g = -2 phi / (u^2 R^2)
        g = -2.0 * v / (u ** 2 * R2)
        # dg/dx = dg/du * du/dx, dg/du = -2/R2 * (phi'(u)/u^2 - 2 phi/u^3), phi'(u) = phi/u^2
        dg_du = -2.0 / R2 * (v / u ** 4 - 2.0 * v / u ** 3)
        du_dx = -2.0 * z / R2
        hess = g[..., None, None] * np.eye(self.dim) + dg_du[..., None, None] * z[..., :, None] * du_dx[..., None, :]
        return np.where(inside[..., None, None], hess, 0.0)

    def integral(self):
        # radial integral of the bump profile, computed once by Gauss-Legendre
        x, w = np.polynomial.legendre.leggauss(200)
        r = 0.5 * (x + 1.0)
        prof = np.exp(1.0 - 1.0 / (1.0 - r ** 2))
        from .quadrature import sphere_area
        return float(self.height * sphere_area(self.dim) * self.radius ** self.dim
                     * np.sum(0.5 * w * prof * r ** (self.dim - 1)))

    def support_radius(self):
        return self.radius

    def cell_average(self, nodes, h, order=8):
        return super().cell_average(nodes, h, order)

    def describe(self):
        return {"name": self.name, "dim": self.dim, "center": list(self.center_),
                "radius": self.radius, "height": self.height}


@dataclass(frozen=True)
class Constant(TestFunction):
    level: float = 1.0
    name = "constant"
    smooth = True

    def __post_init__(self):
        object.__setattr__(self, "exterior", float(self.level))

    def value(self, x):
        x = _pts(x, self.dim)
        return np.full(x.shape[:-1], float(self.level))

    def grad(self, x):
        x = _pts(x, self.dim)
        return np.zeros(x.shape)

    def hessian(self, x):
        x = _pts(x, self.dim)
        return np.zeros(x.shape + (self.dim,))

    def integral(self):
        return 0.0 if self.level == 0 else math.inf

    def support_radius(self):
        return 0.0

    def contains(self, x):
        x = _pts(x, self.dim)
        return np.full(x.shape[:-1], self.level != 0)

    def cell_average(self, nodes, h, order=6):
        nodes = _pts(nodes, self.dim)
        return np.full(len(nodes), float(self.level))

    def describe(self):
        return {"name": self.name, "dim": self.dim, "level": self.level}


def _vec(v, dim):
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.size == 1 and dim > 1:
        v = np.full(dim, float(v[0]))
    if v.size != dim:
        raise ConfigError(f"expected {dim} coordinates, got {v.tolist()}")
    return tuple(float(c) for c in v)


def make_function(name: str, dim: int = 1, **params) -> TestFunction:
    """Build a named test function from plain parameters (config friendly)."""
    try:
        if name == "gaussian":
            return Gaussian(dim, center_=_vec(params.pop("center", 0.0), dim),
                            width=float(params.pop("width", 1.0)),
                            height=float(params.pop("height", 1.0)), **params)
        if name == "indicator":
            lo, hi = _vec(params.pop("lo"), dim), _vec(params.pop("hi"), dim)
            if any(a >= b for a, b in zip(lo, hi)):
                raise ConfigError("indicator needs lo < hi on every axis")
            return Indicator(dim, lo=lo, hi=hi, height=float(params.pop("height", 1.0)), **params)
        if name == "bump":
            return SmoothBump(dim, center_=_vec(params.pop("center", 0.0), dim),
                              radius=float(params.pop("radius", 1.0)),
                              height=float(params.pop("height", 1.0)), **params)
        if name == "constant":
            return Constant(dim, level=float(params.pop("level", 1.0)), **params)
        if name == "zero":
            return Constant(dim, level=0.0, **params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for function {name!r}: {exc}") from exc
    raise ConfigError(f"unknown test function {name!r}")
