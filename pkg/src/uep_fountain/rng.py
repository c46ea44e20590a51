"""Counter-based random numbers.

Every coded symbol draws its randomness from a hash of
(stream seed, symbol index, lane), so an encoder and a decoder that agree
on the seed rebuild the same graph without sharing generator state, and any
symbol range can be produced independently of the others.

The mixer is SplitMix64's finalizer, vectorized over numpy uint64 arrays.
"""
import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def _mix_int(x):
    x &= _MASK
    x = ((x ^ (x >> 30)) * _M1) & _MASK
    x = ((x ^ (x >> 27)) * _M2) & _MASK
    return x ^ (x >> 31)


def derive_seed(seed, *tags):
    """Derive a child 64-bit seed from ``seed`` and integer tags."""
    h = _mix_int(int(seed) + _GOLDEN)
    for t in tags:
        h = _mix_int(h ^ _mix_int((int(t) + 1) * _GOLDEN))
    return h


def _mix(x):
    x = x ^ (x >> np.uint64(30))
    x = x * np.uint64(_M1)
    x = x ^ (x >> np.uint64(27))
    x = x * np.uint64(_M2)
    return x ^ (x >> np.uint64(31))


def hash64(seed, counter, lane):
    """uint64 hash of (seed, counter, lane); ``counter`` and ``lane`` broadcast."""
    counter = np.asarray(counter, dtype=np.uint64)
    lane = np.asarray(lane, dtype=np.uint64)
    with np.errstate(over="ignore"):
        base = np.uint64(derive_seed(seed))
        c = _mix((counter + np.uint64(1)) * np.uint64(_GOLDEN))
        x = _mix(base ^ c)
        x = _mix(x ^ ((lane + np.uint64(1)) * np.uint64(_M2)))
    return x


def uniform(seed, counter, lane):
    """Uniform doubles strictly inside (0, 1), one per broadcast (counter, lane)."""
    x = hash64(seed, counter, lane) >> np.uint64(11)
    return (x.astype(np.float64) + 0.5) * (1.0 / (1 << 53))


def gumbel(seed, counter, lane):
    return -np.log(-np.log(uniform(seed, counter, lane)))
