"""Counter-based random streams for the tracing kernels.

Every draw is a pure function of (seed, tx, ray, bounce, draw index), so ray
work items can be scheduled on any number of threads, or replayed, without
changing a single sample.  The generator chains splitmix64 finalizers, one
per key component; each finalizer is a bijection on 64-bit integers and the
chain passes the usual equidistribution smoke tests for Monte-Carlo use.
"""

import numba
import numpy as np

_U64 = np.uint64
_INV_2_53 = 1.0 / 9007199254740992.0  # 2^-53


@numba.njit(numba.uint64(numba.uint64), cache=True, inline="always")
def _splitmix64(x):
    z = (x + _U64(0x9E3779B97F4A7C15)) & _U64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)) & _U64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)) & _U64(0xFFFFFFFFFFFFFFFF)
    return z ^ (z >> _U64(31))


@numba.njit(
    numba.uint64(numba.uint64, numba.uint64, numba.uint64, numba.uint64, numba.uint64),
    cache=True,
    inline="always",
)
def stream_u64(seed, tx, ray, bounce, draw):
    """64-bit sample for the given stream coordinates."""
    h = _splitmix64(seed)
    h = _splitmix64(h ^ tx)
    h = _splitmix64(h ^ ray)
    h = _splitmix64(h ^ bounce)
    h = _splitmix64(h ^ draw)
    return h


@numba.njit(
    numba.float64(numba.uint64, numba.uint64, numba.uint64, numba.uint64, numba.uint64),
    cache=True,
    inline="always",
)
def stream_uniform(seed, tx, ray, bounce, draw):
    """Uniform double in [0, 1) with 53 random mantissa bits."""
    return (stream_u64(seed, tx, ray, bounce, draw) >> _U64(11)) * _INV_2_53
