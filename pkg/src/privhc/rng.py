"""Deterministic counter-mode randomness.

All protocol-visible randomness (permutations, blinding terms, wire labels)
is drawn from SHA-256 counter streams so that seeded runs are reproducible
across platforms and processes.  When no seed is given, a fresh seed is
taken from the OS.
"""
from __future__ import annotations

import hashlib
import secrets


class CtrRng:
    """SHA-256 counter-mode stream with hierarchical domain separation."""

    def __init__(self, seed: int | bytes | None = None, domain: bytes = b""):
        if seed is None:
            seed = secrets.token_bytes(32)
        if isinstance(seed, int):
            seed = seed.to_bytes(32, "big", signed=False)
        self._key = hashlib.sha256(domain + b"|" + seed).digest()
        self._counter = 0
        self._buf = b""

    def child(self, tag: str) -> "CtrRng":
        """Derive an independent stream; same (seed, tag) -> same stream."""
        return CtrRng(self._key, domain=tag.encode())

    def bytes(self, n: int) -> bytes:
        while len(self._buf) < n:
            block = hashlib.sha256(
                self._key + self._counter.to_bytes(8, "big")
            ).digest()
            self._counter += 1
            self._buf += block
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    def randbits(self, k: int) -> int:
        """Uniform integer in [0, 2**k)."""
        nbytes = (k + 7) // 8
        v = int.from_bytes(self.bytes(nbytes), "big")
        return v >> (nbytes * 8 - k)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        k = n.bit_length()
        while True:
            v = self.randbits(k)
            if v < n:
                return v

    def permutation(self, n: int) -> list[int]:
        """Fisher-Yates permutation of range(n)."""
        perm = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.randbelow(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def seed32(self) -> int:
        """A 32-bit integer, e.g. for seeding numpy generators."""
        return self.randbits(32)


def seeded_permutation(n: int, seed: int | bytes) -> list[int]:
    return CtrRng(seed, domain=b"perm").permutation(n)


def apply_perm(xs, perm: list[int]) -> list:
    """Output slot i receives input element perm[i]."""
    return [xs[p] for p in perm]


def compose(first: list[int], second: list[int]) -> list[int]:
    """Permutation equal to applying `first` and then `second`.

    apply_perm(apply_perm(xs, first), second) == apply_perm(xs, compose(first, second))
    """
    return [first[s] for s in second]
