"""Deterministic sub-seed derivation for reproducible pipelines."""

from __future__ import annotations

import hashlib


def derive_seed(*parts) -> int:
    """Hash the parts into a 64-bit seed.

    Components are joined by their repr so that, for example, the string
    "1" and the integer 1 derive different seeds.
    """
    text = "\x1f".join(repr(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
