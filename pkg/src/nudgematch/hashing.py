"""Stable hashing helpers.

All randomized-but-reproducible decisions (experiment bucketing, tie breaks)
go through a keyed SHA-256 hash so results are identical across processes,
platforms and Python versions. Never use the builtin hash(), which is salted
per process.
"""
import hashlib


def stable_hash64(*parts) -> int:
    """Hash the given parts to a uniform unsigned 64-bit integer."""
    key = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(key).digest()
    return int.from_bytes(digest[:8], "big")


def unit_interval(*parts) -> float:
    """Hash the given parts to a float in [0, 1)."""
    return stable_hash64(*parts) / 2**64
