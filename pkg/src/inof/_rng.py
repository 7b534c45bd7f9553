"""Per-realization random streams usable inside nogil numba kernels.

xoshiro256** (Blackman & Vigna) seeded through splitmix64. The stream of
realization ``r`` depends only on ``(master_seed, r)``, so results do not
depend on how realizations are scheduled across threads.
"""

import numba as nb
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK32 = np.uint64(0xFFFFFFFF)
_TWO32 = np.uint64(1 << 32)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@nb.njit(nogil=True, cache=True)
def seed_stream(state, master_seed, r):
    """Fill ``state`` (uint64[4]) for realization ``r``."""
    x = _mix64(np.uint64(master_seed) + _GOLDEN) ^ np.uint64(r)
    for k in range(4):
        x = x + _GOLDEN
        state[k] = _mix64(x)


@nb.njit(nogil=True, cache=True)
def next_u64(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@nb.njit(nogil=True, cache=True)
def next_double(s):
    """Uniform double in [0, 1)."""
    return np.float64(next_u64(s) >> np.uint64(11)) * _INV53


@nb.njit(nogil=True, cache=True)
def next_below(s, bound):
    """Unbiased integer in [0, bound) for 1 <= bound < 2**32 (Lemire)."""
    n = np.uint64(bound)
    m = (next_u64(s) >> np.uint64(32)) * n
    low = m & _MASK32
    if low < n:
        threshold = (_TWO32 - n) % n
        while low < threshold:
            m = (next_u64(s) >> np.uint64(32)) * n
            low = m & _MASK32
    return np.int64(m >> np.uint64(32))


@nb.njit(nogil=True, cache=True)
def shuffle_into(out, items, s):
    """Fisher-Yates permutation of ``items`` written to ``out``."""
    n = len(items)
    for k in range(n):
        out[k] = items[k]
    for k in range(n - 1, 0, -1):
        j = next_below(s, k + 1)
        tmp = out[k]
        out[k] = out[j]
        out[j] = tmp


class Stream:
    """Python handle on one realization's stream (for stepwise use)."""

    def __init__(self, master_seed: int = 0, realization: int = 0, state=None):
        self.state = np.zeros(4, dtype=np.uint64)
        if state is not None:
            self.state[:] = state
        else:
            seed_stream(self.state, np.uint64(master_seed & 0xFFFFFFFFFFFFFFFF), realization)

    def random(self) -> float:
        return float(next_double(self.state))

    def below(self, bound: int) -> int:
        return int(next_below(self.state, bound))

    def permutation(self, items) -> np.ndarray:
        items = np.asarray(items)
        out = np.empty_like(items)
        shuffle_into(out, items, self.state)
        return out
