"""Monte Carlo simulation of the truncated jump chain behind e^{t A_eps}.

Event times form a Poisson clock. At each event the chain proposes a jump
from the envelope M|h|^(-alpha-d) 1{|h| > eps} (radius eps * U^(-1/alpha),
uniform direction) and accepts it with probability f(x, x+h)|h|^(alpha+d)/M.

* Translation-invariant kernels run the clock at rate b_bar = b_eps and retry
  rejected proposals until one is accepted, so every event is a jump.
* Other kernels run the clock at the envelope rate A eps^-alpha >= b_bar and
  make a single proposal per event; a rejection is a lazy self-jump. The jump
  rate out of x is then exactly b_eps(x), so the law of the chain is the same
  as with clock rate b_bar, without evaluating b_eps along the path.

Random words come from Threefry keyed by the master seed with counter
(path index, draw index); draw 0 is the event count and event j, attempt a,
slot s uses draw ((j * 1024 + a) * 8 + s).
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy import stats

from .errors import RejectionError
from .quadrature import ball_volume
from .rng import split_seed, threefry2x32, uniform, uniforms_for, words_to_unit
from .truncation import TruncationContext

MAX_ATTEMPTS = 1024
SLOTS = 8
MAX_EVENTS = (2 ** 32) // (MAX_ATTEMPTS * SLOTS) - 1
DEFAULT_CHUNK = 1 << 15


def draw_index(event: int, attempt: int, slot: int) -> int:
    return (event * MAX_ATTEMPTS + attempt) * SLOTS + slot


@nb.njit(inline="always")
def _propose(k0, k1, path, base, eps, inv_alpha, d, h):
    """Fill h with an envelope proposal using draws base .. base+6; return |h|."""
    a, b = threefry2x32(k0, k1, np.uint64(path), np.uint64(base))
    u = words_to_unit(a, b)
    if inv_alpha == 1.0:
        r = eps / u
    else:
        r = eps * u ** (-inv_alpha)
    if d == 1:
        h[0] = r if (b & np.uint64(1)) else -r
    elif d == 2:
        theta = 2.0 * np.pi * uniform(k0, k1, path, base + 1)
        h[0] = r * np.cos(theta)
        h[1] = r * np.sin(theta)
    else:
        norm2 = 0.0
        for s in range((d + 1) // 2):
            a2, b2 = threefry2x32(k0, k1, np.uint64(path), np.uint64(base + 1 + s))
            u1 = (np.float64(a2) + 0.5) * 2.3283064365386963e-10
            u2 = (np.float64(b2) + 0.5) * 2.3283064365386963e-10
            rad = np.sqrt(-2.0 * np.log(u1))
            h[2 * s] = rad * np.cos(2.0 * np.pi * u2)
            if 2 * s + 1 < d:
                h[2 * s + 1] = rad * np.sin(2.0 * np.pi * u2)
        for i in range(d):
            norm2 += h[i] * h[i]
        scale = r / np.sqrt(norm2)
        for i in range(d):
            h[i] *= scale
    return r


@nb.njit(cache=True, nogil=True)
def _walk_exact(k0, k1, paths, counts, x0, eps, inv_alpha, out):
    """Paths whose proposals are always accepted (kernel equal to its envelope)."""
    d = x0.shape[0]
    h = np.empty(d)
    for i in range(paths.shape[0]):
        for c in range(d):
            out[i, c] = x0[c]
        p = paths[i]
        for j in range(1, counts[i] + 1):
            _propose(k0, k1, p, (j * 1024) * 8, eps, inv_alpha, d, h)
            for c in range(d):
                out[i, c] += h[c]


@nb.njit(cache=True, nogil=True)
def _proposals(k0, k1, paths, bases, eps, inv_alpha, d):
    n = paths.shape[0]
    out = np.empty((n, d))
    h = np.empty(d)
    for i in range(n):
        _propose(k0, k1, paths[i], bases[i], eps, inv_alpha, d, h)
        for c in range(d):
            out[i, c] = h[c]
    return out


@dataclass(frozen=True)
class PathEndpoint:
    start: np.ndarray
    t: float
    endpoint: np.ndarray
    jumps: int          # clock events
    accepted: int       # events that moved the chain

    @property
    def moved(self) -> bool:
        return self.accepted > 0


@dataclass(frozen=True)
class EndpointBatch:
    start: np.ndarray
    t: float
    rate: float
    seed: int
    path_offset: int
    endpoints: np.ndarray = field(repr=False)
    jumps: np.ndarray = field(repr=False)
    accepted: np.ndarray = field(repr=False)

    @property
    def n_paths(self) -> int:
        return len(self.jumps)

    @property
    def moved(self) -> np.ndarray:
        return self.accepted > 0

    def path(self, i: int) -> PathEndpoint:
        return PathEndpoint(self.start, self.t, self.endpoints[i], int(self.jumps[i]), int(self.accepted[i]))


def clock_rate(ctx: TruncationContext) -> float:
    return ctx.b_bar if ctx.kernel.translation_invariant else ctx.envelope_rate


def _event_counts(k0, k1, paths, lam):
    if lam == 0:
        return np.zeros(len(paths), dtype=np.int64)
    u = uniforms_for(k0, k1, paths, np.zeros(1, dtype=np.int64))
    counts = stats.poisson.ppf(u, lam).astype(np.int64)
    if counts.max(initial=0) > MAX_EVENTS:
        raise RejectionError(f"path needs {counts.max()} events; the counter layout allows {MAX_EVENTS}")
    return counts


def _simulate_rounds(ctx, k0, k1, paths, counts, x0):
    """Event-by-event vectorised simulation; consumes the same draws as _walk_exact."""
    kernel = ctx.kernel
    d = kernel.dim
    n = len(paths)
    X = np.tile(x0, (n, 1))
    accepted = np.zeros(n, dtype=np.int64)
    inv_alpha = 1.0 / kernel.alpha
    retry = kernel.translation_invariant
    p_env = kernel.alpha + d
    for j in range(1, int(counts.max(initial=0)) + 1):
        pending = np.nonzero(counts >= j)[0]
        attempt = 0
        while pending.size:
            if attempt >= MAX_ATTEMPTS:
                raise RejectionError(f"no proposal accepted after {MAX_ATTEMPTS} attempts; "
                                     "the kernel may violate its declared envelope")
            base = np.full(pending.size, draw_index(j, attempt, 0), dtype=np.int64)
            h = _proposals(k0, k1, paths[pending], base, ctx.eps, inv_alpha, d)
            if kernel.exact_envelope:
                acc = np.ones(pending.size, dtype=bool)
            else:
                # use the displacement that is actually realised in floating point
                y = X[pending] + h
                h = y - X[pending]
                r = np.sqrt(np.sum(h * h, axis=1))
                ratio = kernel.func(X[pending], y) * r ** p_env / kernel.M
                if np.any(ratio > 1.0 + 1e-12):
                    raise RejectionError(f"acceptance ratio {ratio.max():.6g} > 1: kernel exceeds M|h|^(-alpha-d)")
                u = uniforms_for(k0, k1, paths[pending], base + 7)
                acc = u < ratio
            moved = pending[acc]
            X[moved] += h[acc]
            accepted[moved] += 1
            pending = pending[~acc] if retry else pending[:0]
            attempt += 1
    return X, accepted


def _simulate_chunk(ctx, k0, k1, paths, x0, t, lam, force_rounds):
    counts = _event_counts(k0, k1, paths, lam)
    kernel = ctx.kernel
    if kernel.exact_envelope and kernel.translation_invariant and not force_rounds:
        out = np.empty((len(paths), kernel.dim))
        _walk_exact(k0, k1, paths, counts, x0, ctx.eps, 1.0 / kernel.alpha, out)
        return out, counts, counts.copy()
    X, accepted = _simulate_rounds(ctx, k0, k1, paths, counts, x0)
    return X, counts, accepted


def sample_endpoints(ctx: TruncationContext, x0, t: float, N: int, seed: int = 0,
                     workers: int = 1, path_offset: int = 0, chunk: int = DEFAULT_CHUNK,
                     force_rounds: bool = False) -> EndpointBatch:
    """Endpoints X_t of N independent paths started at x0 (paths path_offset ..)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if N < 1:
        raise ValueError("N must be positive")
    d = ctx.dim
    x0 = np.asarray(x0, dtype=float).reshape(d)
    k0, k1 = split_seed(seed)
    rate = clock_rate(ctx)
    lam = t * rate
    starts = list(range(path_offset, path_offset + N, chunk))

    def run(s):
        paths = np.arange(s, min(s + chunk, path_offset + N), dtype=np.int64)
        return _simulate_chunk(ctx, k0, k1, paths, x0, t, lam, force_rounds)

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    X = np.concatenate([p[0] for p in parts])
    jumps = np.concatenate([p[1] for p in parts])
    accepted = np.concatenate([p[2] for p in parts])
    return EndpointBatch(x0, float(t), rate, int(seed), int(path_offset), X, jumps, accepted)


def sample_endpoint(ctx: TruncationContext, x0, t: float, seed: int = 0, path_index: int = 0) -> PathEndpoint:
    return sample_endpoints(ctx, x0, t, 1, seed=seed, path_offset=path_index).path(0)


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n_paths: int

    def within(self, value: float, n_sigma: float = 3.0) -> bool:
        return abs(self.mean - value) <= n_sigma * self.stderr


def estimate_semigroup(ctx: TruncationContext, phi, x0, t: float, N: int, seed: int = 0,
                       workers: int = 1, batch: EndpointBatch | None = None) -> MCEstimate:
    """Plain Monte Carlo mean of phi(X_t) and its standard error."""
    if N < 100:
        raise ValueError("use at least 100 paths")
    batch = batch or sample_endpoints(ctx, x0, t, N, seed=seed, workers=workers)
    vals = np.asarray(phi(batch.endpoints), dtype=float)
    mean = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
    return MCEstimate(mean, stderr, len(vals))


# ------------------------------------------------------------------ densities


@dataclass(frozen=True)
class GridBinning:
    """Rectangular bins: one edge array per axis."""

    edges: tuple

    @classmethod
    def uniform(cls, lo: float, hi: float, n_bins: int, dim: int = 1) -> "GridBinning":
        e = np.linspace(lo, hi, n_bins + 1)
        return cls(tuple(e for _ in range(dim)))

    def assign(self, y: np.ndarray, x0: np.ndarray):
        counts, _ = np.histogramdd(y, bins=list(self.edges))
        inside = np.ones(len(y), dtype=bool)
        for ax, e in enumerate(self.edges):
            inside &= (y[:, ax] >= e[0]) & (y[:, ax] <= e[-1])
        return counts.ravel().astype(np.int64), int(len(y) - inside.sum())

    def centers(self) -> np.ndarray:
        mids = [0.5 * (e[1:] + e[:-1]) for e in self.edges]
        mesh = np.meshgrid(*mids, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def volumes(self) -> np.ndarray:
        widths = [np.diff(e) for e in self.edges]
        mesh = np.meshgrid(*widths, indexing="ij")
        return np.prod(np.stack([m.ravel() for m in mesh], axis=1), axis=1)

    def distances(self, x0: np.ndarray) -> np.ndarray:
        return np.linalg.norm(self.centers() - x0, axis=1)


@dataclass(frozen=True)
class RadialBinning:
    """Shells r_k <= |y - x0| < r_{k+1} around the start point."""

    edges: np.ndarray
    dim: int = 1

    def assign(self, y: np.ndarray, x0: np.ndarray):
        r = np.linalg.norm(y - x0, axis=1)
        counts, _ = np.histogram(r, bins=self.edges)
        out = int(np.sum((r < self.edges[0]) | (r > self.edges[-1])))
        return counts.astype(np.int64), out

    def centers(self) -> np.ndarray:
        return (0.5 * (self.edges[1:] + self.edges[:-1]))[:, None]

    def volumes(self) -> np.ndarray:
        return ball_volume(self.dim) * np.diff(self.edges ** self.dim)

    def distances(self, x0: np.ndarray) -> np.ndarray:
        return self.centers()[:, 0]


@dataclass(frozen=True)
class DensityEstimate:
    """Histogram of moved endpoints plus the atom (paths that never moved).

    atom_count + sum(counts) + out_of_range == n_paths exactly.
    """

    binning: object
    x0: np.ndarray
    t: float
    eps: float
    n_paths: int
    counts: np.ndarray = field(repr=False)
    atom_count: int = 0
    out_of_range: int = 0

    @property
    def atom_mass(self) -> float:
        return self.atom_count / self.n_paths

    @property
    def histogram_mass(self) -> float:
        return float(self.counts.sum()) / self.n_paths

    @property
    def out_of_range_mass(self) -> float:
        return self.out_of_range / self.n_paths

    @property
    def density(self) -> np.ndarray:
        return self.counts / (self.n_paths * self.binning.volumes())

    @property
    def stderr(self) -> np.ndarray:
        p = self.counts / self.n_paths
        return np.sqrt(p * (1.0 - p) / self.n_paths) / self.binning.volumes()

    def to_csv(self, path) -> None:
        centers = self.binning.centers()
        cols = ["r"] if isinstance(self.binning, RadialBinning) else \
            (["x"] if centers.shape[1] == 1 else [f"x{i + 1}" for i in range(centers.shape[1])])
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["# atom_mass", format(self.atom_mass, ".17g"), "n_paths", self.n_paths,
                         "out_of_range_mass", format(self.out_of_range_mass, ".17g")])
            wr.writerow(cols + ["density", "stderr", "count"])
            for c, dens, se, cnt in zip(centers, self.density, self.stderr, self.counts):
                wr.writerow([format(v, ".17g") for v in c] + [format(dens, ".17g"), format(se, ".17g"), int(cnt)])


def estimate_density(ctx: TruncationContext, x0, t: float, N: int, binning, seed: int = 0,
                     workers: int = 1, batch: EndpointBatch | None = None) -> DensityEstimate:
    """Empirical transition density of the truncated chain at time t."""
    batch = batch or sample_endpoints(ctx, x0, t, N, seed=seed, workers=workers)
    moved = batch.moved
    counts, out = binning.assign(batch.endpoints[moved], batch.start)
    est = DensityEstimate(binning, batch.start, float(t), ctx.eps, batch.n_paths, counts,
                          int((~moved).sum()), out)
    if counts.sum() == 0:
        warnings.warn("density histogram is empty; t * b_bar is too small for this N", RuntimeWarning)
    return est
