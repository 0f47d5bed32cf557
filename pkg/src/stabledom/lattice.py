"""Regular grids, the discretized truncated kernel and the iterated-kernel recursion.

The kernel matrix uses cell integrals of the isotropic envelope rather than
point values: K[i, j] = m(x_i, x_j) * E(x_j - x_i), where m = f(x, y)|y-x|^(alpha+d)
is the bounded modulation of f and E(delta) is the exact integral of
|y|^(-alpha-d) over the cell centred at delta with the eps-ball removed. For
the isotropic kernel this is the exact cell integral of f_eps, so row sums
differ from b_eps only by the mass that jumps out of the box.

Iterated kernels are stored normalized: g_n = f_n / b_bar^n and the atom weight
a_n = (1 - b(x)/b_bar)^n.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy import integrate

from .errors import BudgetError, LatticeMismatchError, QuadratureError, ResolutionError
from .quadrature import distance_to_box, gauss_legendre, polar_integral, sphere_area
from .truncation import TruncationContext, b_eps

DEFAULT_NODE_BUDGET = 4096


@dataclass(frozen=True)
class Lattice:
    """Cell-centred grid on [-R, R]^d with n points per axis and spacing h = 2R/n."""

    R: float
    n: int
    dim: int = 1

    def __post_init__(self):
        if self.R <= 0 or self.n < 1:
            raise ValueError("lattice needs R > 0 and n >= 1")
        if self.dim not in (1, 2):
            raise ValueError("lattices are supported in d = 1 and d = 2 only")

    @classmethod
    def centered(cls, h: float, k: int, dim: int = 1) -> "Lattice":
        """Lattice with spacing h and 2k+1 points per axis, so the origin is a node."""
        n = 2 * k + 1
        return cls(R=0.5 * n * h, n=n, dim=dim)

    @property
    def h(self) -> float:
        return 2.0 * self.R / self.n

    @property
    def weight(self) -> float:
        return self.h ** self.dim

    @property
    def n_nodes(self) -> int:
        return self.n ** self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.R + (np.arange(self.n) + 0.5) * self.h

    @cached_property
    def multi_index(self) -> np.ndarray:
        grids = np.meshgrid(*([np.arange(self.n)] * self.dim), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @cached_property
    def points(self) -> np.ndarray:
        return self.axis[self.multi_index]

    def index_of(self, x, tol: float = 1e-9) -> int:
        """Flat index of the node at x (must coincide with a node up to tol*h)."""
        x = np.asarray(x, dtype=float).reshape(self.dim)
        idx = np.rint((x + self.R) / self.h - 0.5).astype(int)
        if np.any(idx < 0) or np.any(idx >= self.n):
            raise LatticeMismatchError(f"point {x.tolist()} is outside the lattice box")
        if np.max(np.abs(self.axis[idx] - x)) > tol * self.h:
            raise LatticeMismatchError(f"point {x.tolist()} is not a lattice node")
        return int(np.ravel_multi_index(tuple(idx), (self.n,) * self.dim))

    def nearest_index(self, x) -> int:
        x = np.asarray(x, dtype=float).reshape(self.dim)
        idx = np.clip(np.rint((x + self.R) / self.h - 0.5).astype(int), 0, self.n - 1)
        return int(np.ravel_multi_index(tuple(idx), (self.n,) * self.dim))

    def describe(self) -> dict:
        return {"R": self.R, "n": self.n, "dim": self.dim, "h": self.h}


# ------------------------------------------------------------- envelope cells


def _cells_1d(n: int, h: float, alpha: float, rho: float) -> np.ndarray:
    k = np.abs(np.arange(-(n - 1), n))
    c = k * h
    hi = c + 0.5 * h
    lo = np.maximum(c - 0.5 * h, rho)
    with np.errstate(divide="ignore"):
        out = np.where(hi > lo, (lo ** -alpha - hi ** -alpha) / alpha, 0.0)
    out[k == 0] = 0.0
    return out


def _polar_cell_2d(k1: int, k2: int, h: float, alpha: float, rho: float) -> float:
    """Integral of |y|^(-alpha-2) over the cell centred at (k1 h, k2 h), |y| > rho.
    Assumes k1 >= k2 >= 0 and k1 >= 1, so the cell lies in the half plane y1 > 0."""
    a = np.array([(k1 - 0.5) * h, (k2 - 0.5) * h])
    b = np.array([(k1 + 0.5) * h, (k2 + 0.5) * h])
    corners = [(a[0], a[1]), (a[0], b[1]), (b[0], a[1]), (b[0], b[1])]
    angles = sorted(math.atan2(cy, cx) for cx, cy in corners)

    def radial(theta):
        u = (math.cos(theta), math.sin(theta))
        t_in, t_out = 0.0, math.inf
        for ax in range(2):
            if abs(u[ax]) < 1e-300:
                if not a[ax] <= 0.0 <= b[ax]:
                    return 0.0
                continue
            t1, t2 = a[ax] / u[ax], b[ax] / u[ax]
            t_in = max(t_in, min(t1, t2))
            t_out = min(t_out, max(t1, t2))
        lo = max(t_in, rho)
        if t_out <= lo:
            return 0.0
        return (lo ** -alpha - t_out ** -alpha) / alpha

    total = 0.0
    for lo, hi in zip(angles[:-1], angles[1:]):
        if hi - lo < 1e-15:
            continue
        val, err = integrate.quad(radial, lo, hi, epsabs=0.0, epsrel=1e-11, limit=200)
        total += val
    return total


@lru_cache(maxsize=32)
def envelope_cells(n: int, h: float, alpha: float, rho: float, dim: int) -> np.ndarray:
    """Table E[offset] of cell integrals of |y|^(-alpha-d) over |y| > rho, for
    integer offsets in [-(n-1), n-1]^d. The zero offset is set to 0."""
    if dim == 1:
        out = _cells_1d(n, h, alpha, rho)
        out.setflags(write=False)
        return out
    m = 2 * n - 1
    ks = np.arange(-(n - 1), n)
    K1, K2 = np.meshgrid(ks, ks, indexing="ij")
    A1, A2 = np.abs(K1), np.abs(K2)
    big, small = np.maximum(A1, A2), np.minimum(A1, A2)
    r_min = np.hypot(np.maximum(big - 0.5, 0), np.maximum(small - 0.5, 0)) * h
    near = (r_min < max(rho, 0.0) + 2.0 * h) & (big > 0)
    out = np.zeros((m, m))
    # far cells: tensor Gauss-Legendre, the integrand is smooth there
    gx, gw = gauss_legendre(8)
    off = (gx - 0.5) * h
    far = ~near & (big > 0)
    c1 = K1[far] * h
    c2 = K2[far] * h
    y1 = c1[:, None, None] + off[None, :, None]
    y2 = c2[:, None, None] + off[None, None, :]
    vals = (y1 ** 2 + y2 ** 2) ** (-(alpha + 2) / 2)
    out[far] = np.einsum("kij,i,j->k", vals, gw, gw) * h * h
    cache: dict[tuple[int, int], float] = {}
    for i, j in zip(*np.nonzero(near)):
        key = (int(big[i, j]), int(small[i, j]))
        if key not in cache:
            cache[key] = _polar_cell_2d(key[0], key[1], h, alpha, rho)
        out[i, j] = cache[key]
    out = out.ravel()
    out.setflags(write=False)
    return out


def _offset_index(lat: Lattice, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Flat index into an envelope_cells table for node pairs (rows x cols)."""
    mi = lat.multi_index
    delta = mi[cols][None, :, :] - mi[rows][:, None, :] + (lat.n - 1)
    if lat.dim == 1:
        return delta[..., 0]
    return delta[..., 0] * (2 * lat.n - 1) + delta[..., 1]


def envelope_row(lat: Lattice, alpha: float, source: int) -> np.ndarray:
    """Cell average of |y - x_source|^(-alpha-d) over each cell (inf at the source)."""
    table = envelope_cells(lat.n, lat.h, alpha, 0.0, lat.dim)
    row = table[_offset_index(lat, np.array([source]), np.arange(lat.n_nodes))[0]] / lat.weight
    row = row.copy()
    row[source] = np.inf
    return row


# ------------------------------------------------------------ kernel matrix


@dataclass(frozen=True)
class DiscreteKernel:
    """Kernel matrix K[i, j] ~ integral of f_eps(x_i, .) over cell j, plus the
    per-node bookkeeping needed for the mass identity and the boundary rule."""

    ctx: TruncationContext
    lat: Lattice
    K: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    b_err: np.ndarray = field(repr=False)
    row_sums: np.ndarray = field(repr=False)
    leak_quad: np.ndarray = field(repr=False)
    leak_env: np.ndarray = field(repr=False)

    @property
    def b_bar(self) -> float:
        return self.ctx.b_bar

    @property
    def leak(self) -> np.ndarray:
        """Discrete out-of-box rate: b - row sum, clipped at 0."""
        return np.maximum(self.b - self.row_sums, 0.0)

    @property
    def excess(self) -> np.ndarray:
        return np.maximum(self.row_sums - self.b, 0.0)

    @property
    def self_rate(self) -> np.ndarray:
        """Lazy self-jump rate making every row total equal b_bar."""
        return np.maximum(self.b_bar - self.b - self.excess, 0.0)

    @property
    def stochastic_defect(self) -> float:
        total = self.row_sums + self.leak + self.self_rate
        return float(np.max(np.abs(total - self.b_bar)) / self.b_bar) if self.b_bar > 0 else 0.0

    def row_sum_defect(self) -> np.ndarray:
        """Relative gap (b - row sum - quadrature out-of-box rate) / b per node."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.b > 0, (self.b - self.row_sums - self.leak_quad) / self.b, 0.0)


def discretize_kernel(ctx: TruncationContext, lat: Lattice,
                      node_budget: int = DEFAULT_NODE_BUDGET) -> DiscreteKernel:
    """Kernel matrix of f_eps on the lattice (cached on the context)."""
    key = ("discrete", lat, node_budget)
    if key in ctx.cache:
        return ctx.cache[key]
    kernel = ctx.kernel
    if kernel.dim != lat.dim:
        raise LatticeMismatchError(f"kernel dimension {kernel.dim} != lattice dimension {lat.dim}")
    if lat.h >= ctx.eps:
        raise ResolutionError(f"lattice spacing {lat.h:g} must be below eps={ctx.eps:g}")
    if lat.n_nodes > node_budget:
        raise BudgetError(f"{lat.n_nodes} nodes exceed the budget of {node_budget}")
    N = lat.n_nodes
    alpha, d = kernel.alpha, lat.dim
    pts = lat.points
    idx = np.arange(N)
    table = envelope_cells(lat.n, lat.h, alpha, ctx.eps, d)
    off = _offset_index(lat, idx, idx)
    E = table[off]
    if kernel.exact_envelope:
        K = kernel.M * E
    else:
        X = np.broadcast_to(pts[:, None, :], (N, N, d))
        Y = np.broadcast_to(pts[None, :, :], (N, N, d))
        r = np.sqrt(np.sum((pts[None, :, :] - pts[:, None, :]) ** 2, axis=-1))
        np.fill_diagonal(r, 1.0)
        m = kernel.func(X, Y) * r ** (alpha + d) if N > 1 else np.zeros((1, 1))
        np.fill_diagonal(m, 0.0)
        K = m * E
    row_sums = K.sum(axis=1)

    if kernel.translation_invariant:
        b = np.full(N, ctx.b_bar)
        b_err = np.full(N, ctx.b_error)
    else:
        b, b_err = b_eps(ctx, pts, full=True)
        if np.any(b > ctx.b_bar):
            worst = int(np.argmax(b))
            raise QuadratureError(f"b_eps at node {pts[worst].tolist()} = {b[worst]:.6g} exceeds "
                                  f"b_bar = {ctx.b_bar:.6g}; enlarge the sampling grid or safety")

    quad = ctx.quad_spec
    dirs, wdir = quad.directions(d)
    dist = np.maximum(distance_to_box(pts, dirs, lat.R), ctx.eps)
    if kernel.homogeneous:
        g = kernel.func(np.zeros((1, d)), dirs)
        leak_quad = (dist ** -alpha) @ (wdir * g) / alpha
    else:
        width = kernel.feature_scale / 4.0 if math.isfinite(kernel.feature_scale) else None

        def integrand(xx, yy):
            return kernel.func(np.broadcast_to(xx, yy.shape), yy)

        inbox = polar_integral(integrand, pts, ctx.eps, dist, quad, width)
        leak_quad = b - inbox
    full_env = kernel.M * sphere_area(d) * ctx.eps ** -alpha / alpha
    leak_env = full_env - kernel.M * E.sum(axis=1)
    dk = DiscreteKernel(ctx, lat, K, b, b_err, row_sums, leak_quad, leak_env)
    ctx.cache[key] = dk
    return dk


# ---------------------------------------------------------- iterated kernels


@dataclass(frozen=True)
class IteratedKernel:
    """g_n = f_{n,eps}(x, .) / b_bar^n on the grid, with a_n = (1 - b(x)/b_bar)^n.

    ``leak`` is the normalized mass that the continuum recursion sends outside
    the box up to order n (from the quadrature out-of-box rate), ``leak_bound``
    the same quantity computed from the stable envelope.
    """

    lat: Lattice
    source: int
    order: int
    values: np.ndarray = field(repr=False)
    atom: float
    b_bar: float
    b_source: float
    leak: float
    leak_bound: float

    @property
    def point(self) -> np.ndarray:
        return self.lat.points[self.source]

    @property
    def mass(self) -> float:
        return float(math.fsum(self.values) * self.lat.weight)

    @property
    def f_values(self) -> np.ndarray:
        """Un-normalized f_{n,eps}(x, .) (may overflow for large n)."""
        with np.errstate(over="ignore"):
            return self.values * self.b_bar ** self.order

    @property
    def target_mass(self) -> float:
        """Normalized mass identity target 1 - (1 - b(x)/b_bar)^n."""
        return 1.0 - self.atom


def mass_identity_defect(it: IteratedKernel, ctx: TruncationContext | None = None,
                         with_leak: bool = True) -> float:
    """|grid mass + out-of-box mass - (b_bar^n - (b_bar - b(x))^n)| / b_bar^n.

    With ``with_leak=False`` the out-of-box mass is not added and the raw gap
    is reduced by the envelope bound instead (a looser bar)."""
    if with_leak:
        return abs(it.mass + it.leak - it.target_mass)
    return max(0.0, abs(it.mass - it.target_mass) - it.leak_bound)


def iterate_kernels(ctx: TruncationContext, lat: Lattice, x, N: int,
                    dk: DiscreteKernel | None = None) -> list[IteratedKernel]:
    """Three-term recursion for f_{n,eps}(x, .), n = 1..N, in normalized form."""
    if N < 1:
        raise ValueError("N must be at least 1")
    dk = dk or discretize_kernel(ctx, lat)
    src = x if isinstance(x, (int, np.integer)) else lat.index_of(x)
    b_bar = ctx.b_bar
    w = lat.weight
    if b_bar <= 0:
        zero = np.zeros(lat.n_nodes)
        return [IteratedKernel(lat, src, n, zero, 1.0, 0.0, 0.0, 0.0, 0.0) for n in range(1, N + 1)]
    KT = dk.K.T / b_bar
    stay = 1.0 - dk.b / b_bar
    first = dk.K[src] / (w * b_bar)
    a1 = 1.0 - dk.b[src] / b_bar
    leak_q = dk.leak_quad / b_bar
    leak_e = dk.leak_env / b_bar
    g = first.copy()
    atom = a1
    L = leak_q[src]
    B = leak_e[src]
    out = [IteratedKernel(lat, src, 1, g.copy(), atom, b_bar, float(dk.b[src]), float(L), float(B))]
    for n in range(2, N + 1):
        L += float(g @ leak_q) * w + atom * leak_q[src]
        B += float(g @ leak_e) * w + atom * leak_e[src]
        g = KT @ g + stay * g + atom * first
        atom *= a1
        out.append(IteratedKernel(lat, src, n, g.copy(), atom, b_bar, float(dk.b[src]), float(L), float(B)))
    return out


def export_iterated_csv(kernels: list[IteratedKernel], path) -> None:
    """Columns: node coordinate(s), n, normalized value g_n."""
    if not kernels:
        raise ValueError("nothing to export")
    lat = kernels[0].lat
    coords = ["x"] if lat.dim == 1 else ["x1", "x2"]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(coords + ["n", "g"])
        for it in kernels:
            for p, v in zip(lat.points, it.values):
                wr.writerow([format(c, ".17g") for c in p] + [it.order, format(v, ".17g")])
