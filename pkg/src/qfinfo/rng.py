"""Counter-based random streams.

Every stream is a single uint64 word advanced by a Weyl increment and
whitened with the SplitMix64 finalizer.  Streams for independent work items
are obtained with :func:`derive`, so the numbers drawn for item ``i`` never
depend on how items are scheduled across workers.

All kernels are numba-compiled and can be called from Python as well as from
other kernels.  A stream state is a ``np.uint64`` array of shape ``(1,)``.
"""

import math

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / 9007199254740992.0


@njit(cache=True, nogil=True)
def mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def derive_word(seed, index):
    """Child seed for work item ``index`` of the stream family ``seed``."""
    s = np.uint64(seed)
    i = np.uint64(index)
    return mix64(s ^ mix64((i + np.uint64(1)) * GOLDEN))


@njit(cache=True, nogil=True)
def next_u64(state):
    state[0] = state[0] + GOLDEN
    return mix64(state[0])


@njit(cache=True, nogil=True)
def uniform(state):
    """Double in [0, 1) with 53 random bits."""
    return float(next_u64(state) >> np.uint64(11)) * _INV_2_53


@njit(cache=True, nogil=True)
def randint(state, n):
    """Integer in [0, n).  Modulo bias is below n / 2**64."""
    return np.int64(next_u64(state) % np.uint64(n))


@njit(cache=True, nogil=True)
def normal(state):
    u1 = uniform(state)
    u2 = uniform(state)
    return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)


def _u64(x):
    return np.uint64(int(x) & 0xFFFFFFFFFFFFFFFF)


def derive(seed, *path):
    """Fold ``path`` indices into ``seed``; returns a Python int."""
    word = _u64(seed)
    for index in path:
        word = _u64(derive_word(word, _u64(index)))
    return int(word)


def make_stream(seed, *path):
    """Fresh stream state for the work item addressed by ``path``."""
    return np.array([derive(seed, *path)], dtype=np.uint64)
