"""Reproducible random streams for the simulation kernels.

Heavy Monte-Carlo work (path simulation, martingale-difference sampling) runs
inside numba-compiled kernels, so it cannot use numpy ``Generator`` objects
directly.  This module provides a small, fully deterministic generator stack
that works both inside and outside ``nopython`` code:

* substream keys are derived from ``(seed, *path)`` integer tuples with a
  splitmix64 avalanche chain, so any worker can reconstruct its stream from
  the root seed and its logical coordinates (replication, day, purpose, ...)
  without coordination;
* each substream is a xoshiro256++ generator seeded from its key;
* standard normals come from a 256-layer ziggurat whose tables are solved
  numerically at import time (closure of the layer recursion is asserted).

Everything is pure-function style: state is an explicit ``uint64[4]`` array,
so parallel loops over substreams are race-free and schedule-independent.
Plumbing-level randomness outside the kernels (optimizer restarts, noise
draws) uses numpy's Philox via :func:`numpy_generator` with the same keying
scheme.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy.special import erfc

__all__ = [
    "stream_key",
    "xoshiro_state",
    "numpy_generator",
    "normals",
    "uniforms",
]

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)


def _mix64_py(z: int) -> int:
    z &= 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def stream_key(seed: int, *path: int) -> int:
    """Derive a 64-bit substream key from a root seed and integer coordinates.

    The chain is order-sensitive: ``stream_key(s, 1, 2) != stream_key(s, 2, 1)``.
    """
    k = _mix64_py(int(seed) & 0xFFFFFFFFFFFFFFFF)
    for w in path:
        k = _mix64_py(k ^ ((int(w) + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF))
    return k


def xoshiro_state(key: int) -> np.ndarray:
    """Expand a 64-bit key into a xoshiro256++ state vector (splitmix64 stream)."""
    s = np.empty(4, dtype=np.uint64)
    z = int(key) & 0xFFFFFFFFFFFFFFFF
    for i in range(4):
        z = (z + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
        s[i] = _mix64_py(z)
    return s


def numpy_generator(seed: int, *path: int) -> np.random.Generator:
    """Philox-backed numpy generator for the same ``(seed, *path)`` keying."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, *path)))


# ---------------------------------------------------------------------------
# ziggurat tables for the standard normal, 256 layers
# ---------------------------------------------------------------------------

def _build_ziggurat(n_layers: int = 256):
    f = lambda x: np.exp(-0.5 * x * x)
    tail_area = lambda r: np.sqrt(np.pi / 2.0) * erfc(r / np.sqrt(2.0))

    def closure(r):
        # walk the layer recursion up from x_1 = r; return f-value after the
        # last layer (1.0 means the construction closes at x = 0)
        v = r * f(r) + tail_area(r)
        x = r
        y = f(r)
        xs = np.empty(n_layers + 1)
        xs[1] = r
        for i in range(2, n_layers + 1):
            y = y + v / x
            if y >= 1.0:
                return np.inf, None, v
            x = np.sqrt(-2.0 * np.log(y))
            xs[i] = x
        return y, xs, v

    lo, hi = 3.0, 4.0
    for _ in range(128):
        mid = 0.5 * (lo + hi)
        y_end, _, _ = closure(mid)
        if y_end > 1.0 or not np.isfinite(y_end):
            lo = mid  # r too small: strips too fat, curve hit too early
        else:
            hi = mid
    r = hi
    y_end, xs, v = closure(r)
    if xs is None or abs(y_end - 1.0) > 1e-9:
        raise RuntimeError("ziggurat table construction failed to close")
    xs[0] = v / f(r)  # virtual width of the base strip
    fs = np.empty(n_layers + 1)
    fs[1:] = f(xs[1:])
    fs[0] = fs[1]
    return xs, fs, v, r


_ZIG_N = 256
_ZIG_X, _ZIG_F, _ZIG_V, ZIG_R = _build_ziggurat(_ZIG_N)
_ZIG_W = _ZIG_X[:_ZIG_N] / 2.0**52
_ZIG_K = np.empty(_ZIG_N, dtype=np.int64)
_ZIG_K[0] = np.int64(np.floor(2.0**52 * ZIG_R / _ZIG_X[0]))
for _i in range(1, _ZIG_N):
    _ZIG_K[_i] = np.int64(np.floor(2.0**52 * _ZIG_X[_i + 1] / _ZIG_X[_i]))
_ZIG_FTAB = np.empty(_ZIG_N + 1)
_ZIG_FTAB[:] = _ZIG_F
_ZIG_FTAB[_ZIG_N] = 1.0
_INV_R = 1.0 / ZIG_R


@njit(inline="always", cache=True)
def _rotl(x, k):
    return _U64((x << _U64(k)) | (x >> _U64(64 - k)))


@njit(inline="always", cache=True)
def next_u64(s):
    """xoshiro256++ step; mutates the 4-word state in place."""
    out = _U64(_rotl(_U64(s[0] + s[3]), 23) + s[0])
    t = _U64(s[1] << _U64(17))
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return out


@njit(inline="always", cache=True)
def next_unit(s):
    """Uniform draw in (0, 1]."""
    return (np.float64(next_u64(s) >> _U64(11)) + 1.0) * (0.5**53)


@njit(inline="always", cache=True)
def next_normal(s, wtab, ktab, ftab, r, inv_r):
    """Standard normal draw via the 256-layer ziggurat."""
    while True:
        u = next_u64(s)
        idx = np.int64(u & _U64(255))
        j = np.int64(u >> _U64(12))
        z = j * wtab[idx]
        if j < ktab[idx]:
            if u & _U64(256):
                return -z
            return z
        if idx == 0:
            # tail beyond r (Marsaglia)
            while True:
                xx = -np.log(next_unit(s)) * inv_r
                yy = -np.log(next_unit(s))
                if yy + yy > xx * xx:
                    z = r + xx
                    if u & _U64(256):
                        return -z
                    return z
        else:
            y = ftab[idx] + next_unit(s) * (ftab[idx + 1] - ftab[idx])
            if y < np.exp(-0.5 * z * z):
                if u & _U64(256):
                    return -z
                return z
            # wedge rejection: redraw the layer


@njit(inline="always", cache=True)
def znorm(s):
    """Standard normal draw using the module ziggurat tables."""
    return next_normal(s, _ZIG_W, _ZIG_K, _ZIG_FTAB, ZIG_R, _INV_R)


@njit(inline="always", cache=True)
def mix64(z):
    z = _U64(z)
    z = _U64((z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9))
    z = _U64((z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB))
    return _U64(z ^ (z >> _U64(31)))


@njit(inline="always", cache=True)
def substate(key, w1, w2):
    """In-kernel substream state for coordinates (w1, w2) under a parent key."""
    k = mix64(_U64(key) ^ _U64(_U64(w1) + _GOLDEN))
    k = mix64(k ^ _U64(_U64(w2) + _GOLDEN))
    s = np.empty(4, dtype=_U64)
    z = k
    for i in range(4):
        z = _U64(z + _GOLDEN)
        s[i] = mix64(z)
    return s


@njit(cache=True)
def _fill_normals(out, key):
    s = xoshiro_state_nb(key)
    for i in range(out.shape[0]):
        out[i] = znorm(s)


@njit(inline="always", cache=True)
def xoshiro_state_nb(key):
    s = np.empty(4, dtype=_U64)
    z = _U64(key)
    for i in range(4):
        z = _U64(z + _GOLDEN)
        s[i] = mix64(z)
    return s


def normals(key: int, n: int) -> np.ndarray:
    """n standard normals from the substream ``key`` (testing/validation aid)."""
    out = np.empty(n)
    _fill_normals(out, _U64(key))
    return out


@njit(cache=True)
def _fill_uniforms(out, key):
    s = xoshiro_state_nb(key)
    for i in range(out.shape[0]):
        out[i] = next_unit(s)


def uniforms(key: int, n: int) -> np.ndarray:
    """n uniforms in (0, 1] from the substream ``key``."""
    out = np.empty(n)
    _fill_uniforms(out, _U64(key))
    return out
