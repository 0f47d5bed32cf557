"""Polar quadrature shared by the truncation, semigroup and verifier modules.

Radial integrals use composite Gauss-Legendre on log-spaced panels, optionally
subdivided so that no panel is wider than a kernel's feature length (needed for
oscillating kernels). Angular integrals use a fixed direction set: the two
points of S^0 in d=1, equispaced midpoint angles in d=2 and an antipodally
symmetric low-discrepancy point set for d >= 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import gammaln
from scipy.stats import norm, qmc


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere S^{d-1} (2 for d=1, 2*pi for d=2)."""
    return float(2.0 * math.exp(0.5 * d * math.log(math.pi) - gammaln(0.5 * d)))


def ball_volume(d: int) -> float:
    return sphere_area(d) / d


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the ``order``-point Gauss-Legendre rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def _sphere_rule(d: int, n_angular: int, n_sphere: int) -> tuple[np.ndarray, np.ndarray]:
    if d == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif d == 2:
        if n_angular % 2:
            raise ValueError("n_angular must be even so the direction set is antipodal")
        theta = 2.0 * np.pi * (np.arange(n_angular) + 0.5) / n_angular
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    else:
        half = n_sphere // 2
        pts = qmc.Halton(d, scramble=False).random(half + 1)[1:]
        g = norm.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        dirs = np.concatenate([g, -g])
    weights = np.full(len(dirs), sphere_area(d) / len(dirs))
    dirs.setflags(write=False)
    weights.setflags(write=False)
    return dirs, weights


def sphere_rule(d: int, n_angular: int = 256, n_sphere: int = 512):
    """Directions (m, d) and weights (m,) summing to the sphere area."""
    return _sphere_rule(d, n_angular, n_sphere)


@dataclass(frozen=True)
class QuadSpec:
    """Resolution of the polar quadrature.

    ``r_tail=None`` means max(1e3 * eps, 1e3). ``safety`` inflates the sampled
    supremum of b_eps when building a truncation context. ``x_extent`` is the
    half-width of the x-grid used for that supremum (None: max(2, feature
    scale of the kernel)).
    """

    n_panels: int = 64
    order: int = 8
    coarse_order: int = 5
    n_angular: int = 256
    n_sphere: int = 512
    r_tail: float | None = None
    rel_tol: float = 1e-6
    safety: float = 1.05
    n_x_samples: int = 33
    x_extent: float | None = None
    max_nodes: int = 4_000_000

    def tail_radius(self, eps: float) -> float:
        if self.r_tail is not None:
            return max(float(self.r_tail), 2.0 * eps)
        return max(1e3 * eps, 1e3)

    def directions(self, d: int):
        return sphere_rule(d, self.n_angular, self.n_sphere)

    def with_(self, **kwargs) -> "QuadSpec":
        return replace(self, **kwargs)


def radial_rule(r_lo: float, r_hi, n_panels: int, order: int,
                max_width: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes on [r_lo, r_hi] with log-spaced panels.

    ``r_hi`` may be an array (one upper limit per direction); the result then has
    shape (len(r_hi), Q) with a panel layout shared across directions. Entries
    with r_hi <= r_lo get zero weight.
    """
    r_hi = np.atleast_1d(np.asarray(r_hi, dtype=float))
    scalar = r_hi.shape == (1,)
    valid = r_hi > r_lo
    top = np.where(valid, r_hi, r_lo * (1.0 + 1e-12))
    frac = np.arange(n_panels + 1) / n_panels
    edges = r_lo * (top[:, None] / r_lo) ** frac[None, :]
    edges[:, -1] = top
    if max_width is not None and np.isfinite(max_width):
        widths = np.diff(edges, axis=1).max(axis=0)
        subs = np.maximum(1, np.ceil(widths / max_width).astype(int))
        pieces = []
        for k, s in enumerate(subs):
            t = np.arange(s + 1) / s
            pieces.append(edges[:, k:k + 1] + (edges[:, k + 1:k + 2] - edges[:, k:k + 1]) * t[None, :-1])
        pieces.append(edges[:, -1:])
        edges = np.concatenate(pieces, axis=1)
    x, w = gauss_legendre(order)
    lo = edges[:, :-1, None]
    width = np.diff(edges, axis=1)[:, :, None]
    r = (lo + width * x[None, None, :]).reshape(len(top), -1)
    wr = (width * w[None, None, :]).reshape(len(top), -1)
    wr[~valid] = 0.0
    if scalar:
        return r[0], wr[0]
    return r, wr


def polar_integral(integrand: Callable[[np.ndarray, np.ndarray], np.ndarray],
                   x: np.ndarray, r_lo: float, r_hi, spec: QuadSpec,
                   max_width: float | None = None, order: int | None = None) -> np.ndarray:
    """Integrate ``integrand(x, x + r*theta) * r^(d-1)`` over the shell r_lo < r < r_hi.

    ``x`` has shape (k, d); ``r_hi`` is a scalar or an array of shape (k, m) giving
    a per-point, per-direction upper limit (m = number of directions). Returns
    an array of shape (k,).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    k, d = x.shape
    dirs, wdir = spec.directions(d)
    m = len(dirs)
    order = order or spec.order
    r_hi_arr = np.asarray(r_hi, dtype=float)
    out = np.empty(k)
    if r_hi_arr.ndim == 0:
        r, wr = radial_rule(r_lo, float(r_hi_arr), spec.n_panels, order, max_width)
        radial_w = wr * r ** (d - 1)
        per = max(1, spec.max_nodes // max(1, len(r) * m))
        for start in range(0, k, per):
            xs = x[start:start + per]
            pts = xs[:, None, None, :] + r[None, :, None, None] * dirs[None, None, :, :]
            vals = integrand(xs[:, None, None, :], pts)
            out[start:start + per] = np.einsum("kqm,q,m->k", vals, radial_w, wdir)
        return out
    if r_hi_arr.shape != (k, m):
        raise ValueError(f"r_hi must be scalar or shape {(k, m)}, got {r_hi_arr.shape}")
    for i in range(k):
        r, wr = radial_rule(r_lo, r_hi_arr[i], spec.n_panels, order, max_width)
        pts = x[i][None, None, :] + r[:, :, None] * dirs[:, None, :]
        vals = integrand(x[i][None, None, :], pts)
        out[i] = np.sum(vals * wr * r ** (d - 1) * wdir[:, None])
    return out


def distance_to_box(x: np.ndarray, dirs: np.ndarray, half_width: float) -> np.ndarray:
    """Distance from points x (k, d) along each unit direction (m, d) to the
    boundary of the cube [-half_width, half_width]^d. Returns shape (k, m)."""
    x = np.atleast_2d(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        upper = (half_width - x[:, None, :]) / dirs[None, :, :]
        lower = (-half_width - x[:, None, :]) / dirs[None, :, :]
        step = np.where(dirs[None, :, :] > 0, upper, np.where(dirs[None, :, :] < 0, lower, np.inf))
    return step.min(axis=2)
