"""Seed derivation so every stage draws from one root seed.

A component seed is ``root XOR crc32(component_name)``, masked to 63 bits.
Rerunning any stage with the same root therefore reproduces it exactly,
and distinct components never share a stream.
"""

from __future__ import annotations

import zlib

_MASK = (1 << 63) - 1


def derive_seed(root: int, component: str) -> int:
    """Return the deterministic sub-seed for ``component`` under ``root``."""
    return (int(root) ^ zlib.crc32(component.encode("utf-8"))) & _MASK
