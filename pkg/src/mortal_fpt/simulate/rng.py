"""Counter-based random streams.

Each trajectory owns a 64-bit key derived from ``(seed, trajectory_id)``; the
k-th draw of that trajectory is ``mix(key + k * GOLDEN)``. No state is shared
between trajectories, so any partition of ids over workers reproduces the
serial run bit for bit.
"""
from __future__ import annotations

import math

import numba as nb
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_ID_SALT = np.uint64(0xD1B54A32D192ED03)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0
_TWO_PI = 2.0 * math.pi


@nb.njit(cache=True, nogil=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(cache=True, nogil=True)
def stream_key(seed, trajectory_id):
    """Key of the stream for one trajectory (both arguments as uint64)."""
    return mix64(mix64(seed + GOLDEN) ^ (trajectory_id * _ID_SALT + GOLDEN))


@nb.njit(cache=True, nogil=True)
def draw_u64(key, counter):
    return mix64(key + (counter + _ONE) * GOLDEN)


@nb.njit(cache=True, nogil=True)
def draw_uniform(key, counter):
    """Uniform on the open interval (0, 1)."""
    return (float(draw_u64(key, counter) >> _S11) + 0.5) * _INV53


@nb.njit(cache=True, nogil=True)
def draw_normal_pair(key, counter):
    """Two independent standard normals (Box-Muller) from draws counter, counter+1."""
    u1 = draw_uniform(key, counter)
    u2 = draw_uniform(key, counter + _ONE)
    r = math.sqrt(-2.0 * math.log(u1))
    return r * math.cos(_TWO_PI * u2), r * math.sin(_TWO_PI * u2)


def as_seed(seed: int) -> np.uint64:
    """Map any Python int onto the 64-bit seed space."""
    return np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)


@nb.njit(cache=True, nogil=True)
def uniforms(seed, trajectory_id, n):
    """First ``n`` uniforms of one stream; handy for tests."""
    key = stream_key(seed, trajectory_id)
    out = np.empty(n)
    for k in range(n):
        out[k] = draw_uniform(key, np.uint64(k))
    return out
