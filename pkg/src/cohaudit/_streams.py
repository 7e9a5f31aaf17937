"""Deterministic random streams.

Every randomized routine in the library derives its generator from
hash(seed, purpose tags) via Philox, a counter-based generator whose bit
stream does not depend on platform or call order.  Two calls with the
same (seed, tags) always see the same stream, so Monte Carlo trials give
identical results at any thread count and in any execution order.
"""

import hashlib

import numpy as np


def _digest(seed, tags, size):
    h = hashlib.blake2b(digest_size=size)
    h.update(str(int(seed)).encode())
    for tag in tags:
        h.update(b"\x1f")
        h.update(str(tag).encode())
    return h.digest()


def stream(seed, *tags):
    """Fresh Philox generator keyed by blake2b(seed, *tags)."""
    key = np.frombuffer(_digest(seed, tags, 16), dtype="<u8")
    return np.random.Generator(np.random.Philox(key=key))


def substream_seed(seed, *tags):
    """Collapse (seed, tags) into a 63-bit integer usable as a child seed."""
    return int.from_bytes(_digest(seed, tags, 8), "little") >> 1


def k_subset(rng, n, k):
    """Uniform random k-subset of range(n), returned sorted.

    Partial Fisher-Yates: draws exactly k integers from rng regardless of
    n, so the stream consumption is reproducible.
    """
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    idx = np.arange(n)
    for i in range(k):
        j = i + int(rng.integers(0, n - i))
        idx[i], idx[j] = idx[j], idx[i]
    out = idx[:k].copy()
    out.sort()
    return out
