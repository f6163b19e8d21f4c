"""Deterministic seed derivation.

Every random stream in the toolkit is seeded from one master seed plus a
string label, so runs are reproducible and independent stages never share a
stream by accident.
"""

from __future__ import annotations

import hashlib


def derive_seed(master: int, label: str) -> int:
    """A 32-bit seed tied to ``master`` and ``label``."""
    digest = hashlib.sha256(f"{master}:{label}".encode("utf-8")).hexdigest()
    return int(digest, 16) % 2**32
