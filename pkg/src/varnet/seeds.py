"""Order-independent seed derivation.

Every experiment cell gets its seed from its identifiers alone, so any cell
can be rerun in isolation and parallel schedules do not change results.
"""
import hashlib

MASK64 = (1 << 64) - 1


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def tag_hash(tag):
    return int.from_bytes(hashlib.blake2b(str(tag).encode(), digest_size=8).digest(), "little")


def derive_seed(base_seed, *ids):
    """Mix ``base_seed`` with integer or string ids into a 64-bit seed."""
    h = splitmix64(int(base_seed) & MASK64)
    for i in ids:
        v = tag_hash(i) if isinstance(i, str) else int(i) & MASK64
        h = splitmix64(h ^ v)
    return h
