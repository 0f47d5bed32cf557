"""Threefry-2x32 (20 rounds) counter-based generator.

Every random word is a pure function of (key, counter), so a path's draws do
not depend on which worker simulates it or in which order. Words are carried in
uint64 and masked to 32 bits.
"""

from __future__ import annotations

import numba as nb
import numpy as np

MASK32 = np.uint64(0xFFFFFFFF)
_ROT = (13, 15, 26, 6, 17, 29, 16, 24)
TWO_M53 = 2.0 ** -53


@nb.njit(inline="always")
def _rotl(x, r):
    return ((x << np.uint64(r)) | (x >> np.uint64(32 - r))) & np.uint64(0xFFFFFFFF)


@nb.njit(inline="always")
def threefry2x32(k0, k1, c0, c1):
    """One block: key (k0, k1), counter (c0, c1), all uint64 holding 32-bit words."""
    m = np.uint64(0xFFFFFFFF)
    k2 = np.uint64(0x1BD11BDA) ^ k0 ^ k1
    ks = (k0, k1, k2)
    x0 = (c0 + k0) & m
    x1 = (c1 + k1) & m
    for i in range(5):
        for j in range(4):
            r = (13, 15, 26, 6, 17, 29, 16, 24)[(4 * i + j) % 8]
            x0 = (x0 + x1) & m
            x1 = _rotl(x1, r)
            x1 ^= x0
        x0 = (x0 + ks[(i + 1) % 3]) & m
        x1 = (x1 + ks[(i + 2) % 3] + np.uint64(i + 1)) & m
    return x0, x1


@nb.njit(inline="always")
def words_to_unit(a, b):
    """52-bit uniform strictly inside (0, 1): midpoint of the dyadic cell.

    With 53 bits the top midpoint 1 - 2^-54 would round to 1.0."""
    k = (a >> np.uint64(6)) * np.uint64(67108864) + (b >> np.uint64(6))
    return (np.float64(k) + 0.5) * 2.220446049250313e-16


@nb.njit(inline="always")
def uniform(k0, k1, path, draw):
    a, b = threefry2x32(k0, k1, np.uint64(path), np.uint64(draw))
    return words_to_unit(a, b)


@nb.njit(cache=True, nogil=True)
def threefry_block(k0, k1, c0, c1):
    """Vectorised Threefry over counter arrays; returns (n, 2) uint64 words."""
    n = c0.shape[0]
    out = np.empty((n, 2), dtype=np.uint64)
    for i in range(n):
        a, b = threefry2x32(k0, k1, c0[i], c1[i])
        out[i, 0] = a
        out[i, 1] = b
    return out


@nb.njit(cache=True, nogil=True)
def uniforms_for(k0, k1, paths, draw):
    """Uniforms for a set of paths at one draw index (or per-path draw indices)."""
    n = paths.shape[0]
    out = np.empty(n)
    for i in range(n):
        d = draw[i] if draw.shape[0] == n else draw[0]
        out[i] = uniform(k0, k1, paths[i], d)
    return out


def split_seed(seed: int) -> tuple[np.uint64, np.uint64]:
    """64-bit master seed -> Threefry key words (low, high)."""
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32)


def threefry(key: tuple[int, int], counter: tuple[int, int]) -> tuple[int, int]:
    """Scalar convenience wrapper used for known-answer tests."""
    out = threefry_block(np.uint64(key[0]), np.uint64(key[1]),
                         np.array([counter[0]], dtype=np.uint64), np.array([counter[1]], dtype=np.uint64))
    return int(out[0, 0]), int(out[0, 1])
