"""Portable pseudo-random streams.

All randomness in the package comes from the Philox4x64-10 counter-based
generator (Salmon et al., "Random123"), driven through numpy's
``numpy.random.Philox`` with an explicit 128-bit key and a zero counter, so
no seed-sequence hashing is involved.  The key is

    word 0 = seed mod 2**64
    word 1 = fold of the stream keys through splitmix64 (0 if none)

Raw 64-bit outputs are converted to doubles in [0, 1) as
``(u >> 11) * 2**-53``.  Standard normals use the Box-Muller transform on
consecutive uniform pairs (u1, u2):

    r = sqrt(-2 ln(1 - u1)),  z0 = r cos(2 pi u2),  z1 = r sin(2 pi u2)

and are emitted in the order z0, z1, z0', z1', ...  Any implementation of
Philox4x64-10 plus these two transforms reproduces the streams exactly.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def stream_key(seed, *keys):
    """Return the two Philox key words for ``seed`` and sub-stream ``keys``."""
    word1 = 0
    for k in keys:
        word1 = splitmix64(word1 ^ (int(k) & _MASK64))
    return int(seed) & _MASK64, word1


def stream(seed, *keys):
    """Fresh Philox bit generator for (seed, *keys), counter at zero."""
    w0, w1 = stream_key(seed, *keys)
    return np.random.Philox(key=np.array([w0, w1], dtype=np.uint64))


def uniforms(bitgen, size):
    raw = bitgen.random_raw(int(size))
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def standard_normals(bitgen, size):
    size = int(size)
    m = (size + 1) // 2
    u = uniforms(bitgen, 2 * m).reshape(m, 2)
    r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    theta = 2.0 * np.pi * u[:, 1]
    z = np.empty((m, 2))
    z[:, 0] = r * np.cos(theta)
    z[:, 1] = r * np.sin(theta)
    return z.ravel()[:size]


def distinct_integers(bitgen, low, high, count):
    """``count`` distinct integers in [low, high], in draw order.

    Draws ``low + floor(u * (high - low + 1))`` and discards repeats.
    """
    span = high - low + 1
    if count > span:
        raise ValueError(f"cannot draw {count} distinct values from {span}")
    seen = []
    taken = set()
    while len(seen) < count:
        for u in uniforms(bitgen, count - len(seen)):
            v = low + int(u * span)
            if v not in taken:
                taken.add(v)
                seen.append(v)
                if len(seen) == count:
                    break
    return seen
