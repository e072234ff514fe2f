"""Deployment-wide hash configuration.

One collision-resistant hash is chosen per deployment and used for every
digest in the protocol: per-reading digests, accumulator exponents,
verifiable tags, deletion transform cells, and query-log chains. The
default is SHA-256; any ``hashlib`` algorithm name works as long as all
roles agree.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

from .encoding import u32


@lru_cache(maxsize=None)
def _constructor(algorithm: str):
    hashlib.new(algorithm)  # fail fast on unknown names
    ctor = getattr(hashlib, algorithm, None)
    if ctor is None:
        return lambda: hashlib.new(algorithm)
    return ctor


@dataclass(frozen=True)
class Hasher:
    algorithm: str = "sha256"

    @property
    def size(self) -> int:
        return _constructor(self.algorithm)().digest_size

    def digest(self, *parts: bytes) -> bytes:
        h = _constructor(self.algorithm)()
        for part in parts:
            h.update(part)
        return h.digest()

    def expand(self, seed: bytes, length: int) -> bytes:
        """Counter-mode expansion of ``seed`` to exactly ``length`` bytes.

        Output block i is ``H(seed || u32(i))``; blocks are concatenated
        and truncated. Used wherever a digest must fill a whole storage
        cell rather than be truncated into it.
        """
        if length < 0:
            raise ValueError("length must be non-negative")
        ctor = _constructor(self.algorithm)
        blocks = []
        produced = 0
        counter = 0
        while produced < length:
            h = ctor()
            h.update(seed)
            h.update(u32(counter))
            block = h.digest()
            blocks.append(block)
            produced += len(block)
            counter += 1
        return b"".join(blocks)[:length]


DEFAULT_HASHER = Hasher("sha256")
