"""Philox4x32-10 counter-based generator, vectorised with numpy.

Each (counter, key) pair maps to four independent 32-bit words, so a
path's random numbers depend only on (seed, path index, step index) and
never on how paths are split across workers.
"""
import numpy as np

M0 = np.uint64(0xD2511F53)
M1 = np.uint64(0xCD9E8D57)
W0 = 0x9E3779B9
W1 = 0xBB67AE85
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)
TWO_M32 = 2.0 ** -32


def philox4x32(c0, c1, c2, c3, k0, k1, rounds=10):
    """Apply Philox4x32 to counter words (arrays or scalars) under key (k0, k1)."""
    c0, c1, c2, c3 = (np.asarray(x, dtype=np.uint64) for x in (c0, c1, c2, c3))
    k0 = int(k0) & 0xFFFFFFFF
    k1 = int(k1) & 0xFFFFFFFF
    for r in range(rounds):
        if r:
            k0 = (k0 + W0) & 0xFFFFFFFF
            k1 = (k1 + W1) & 0xFFFFFFFF
        p0 = M0 * c0
        p1 = M1 * c2
        hi0, lo0 = p0 >> _SHIFT, p0 & _MASK
        hi1, lo1 = p1 >> _SHIFT, p1 & _MASK
        c0, c1, c2, c3 = (hi1 ^ c1 ^ np.uint64(k0), lo1, hi0 ^ c3 ^ np.uint64(k1), lo0)
    return tuple(x.astype(np.uint32) for x in (c0, c1, c2, c3))


def split_seed(seed):
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be in [0, 2**64)")
    return seed & 0xFFFFFFFF, seed >> 32


def uniforms(step, paths, seed):
    """Four uniform (0, 1) arrays for ``step`` on the given path indices."""
    k0, k1 = split_seed(seed)
    paths = np.asarray(paths, dtype=np.uint64)
    words = philox4x32(np.full(paths.shape, step, dtype=np.uint64), 0,
                       paths & _MASK, paths >> _SHIFT, k0, k1)
    return tuple((w.astype(np.float64) + 0.5) * TWO_M32 for w in words)
