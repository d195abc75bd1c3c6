"""Deterministic counter-based random streams.

Every random draw in the toolkit comes from a Philox generator keyed by a
stable hash of (seed, context tags).  Streams are independent of evaluation
order and thread count, so any computation seeded this way is reproducible
bit-for-bit.
"""

from __future__ import annotations

from hashlib import blake2b

import numpy as np

_SEP = b"\x1f"


def _encode(parts: tuple) -> bytes:
    return _SEP.join(str(p).encode("utf-8") for p in parts)


def stable_hash64(*parts) -> int:
    """Stable 64-bit hash of the given parts (ints/strings), platform independent."""
    digest = blake2b(_encode(parts), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def substream(*parts) -> np.random.Generator:
    """Independent Philox stream keyed by the given parts."""
    digest = blake2b(_encode(parts), digest_size=16).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(digest, "big")))


def seeded_stream(seed: int) -> np.random.Generator:
    """Philox stream keyed directly by an integer seed (e.g. a mask seed)."""
    return np.random.Generator(np.random.Philox(key=seed & ((1 << 128) - 1)))
