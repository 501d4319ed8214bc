"""Stable content hashing shared by the corpus, index and manifest code.

Python's builtin ``hash`` is salted per process, so anything persisted or
used to derive random substreams goes through blake2b instead.
"""

from __future__ import annotations

import hashlib
from typing import Iterable


def stable_digest(parts: Iterable[str], size: int = 16) -> str:
    h = hashlib.blake2b(digest_size=size)
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


def stable_int(text: str) -> int:
    """64-bit integer hash of a string, stable across runs and platforms."""

    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")
