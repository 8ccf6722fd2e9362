"""Deterministic seed derivation.

Run-level seeds fan out into per-call and per-replica seeds through a keyed
hash so that (a) results are reproducible across processes and platforms
(unlike Python's salted ``hash``) and (b) sibling streams are decorrelated.
"""

from __future__ import annotations

import hashlib

_U64 = (1 << 64) - 1


def mix_seed(*parts: int | str | bytes) -> int:
    """Collapse heterogeneous parts into one unsigned 64-bit seed.

    Each part is encoded with a type tag so e.g. ("1", 2) and (1, "2")
    cannot collide.
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        if isinstance(part, bool):
            raise TypeError("bool seed parts are ambiguous; use int")
        if isinstance(part, int):
            h.update(b"i")
            h.update(part.to_bytes(16, "little", signed=True))
        elif isinstance(part, str):
            data = part.encode("utf-8")
            h.update(b"s" + len(data).to_bytes(4, "little"))
            h.update(data)
        elif isinstance(part, bytes):
            h.update(b"b" + len(part).to_bytes(4, "little"))
            h.update(part)
        else:
            raise TypeError(f"unsupported seed part type: {type(part)!r}")
    return int.from_bytes(h.digest(), "little") & _U64
