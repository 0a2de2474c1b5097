"""Named, splittable random streams.

Every stochastic site in the package (dropout, augmentation, shuffling,
initialization) draws from its own counter-based Philox stream derived from
(global seed, site label, *indices). Streams are independent by construction:
advancing one never perturbs another, which is what makes a single run seed a
meaningful reproducibility contract.

Derivation goes through SHA-256 so it is stable across platforms and Python
processes (never the built-in ``hash``).
"""

from __future__ import annotations

import hashlib

import numpy as np


def _digest(seed: int, label: str, indices: tuple[int, ...]) -> bytes:
    msg = "|".join([str(int(seed)), label, *[str(int(i)) for i in indices]])
    return hashlib.sha256(msg.encode("utf-8")).digest()


def philox_key(seed: int, label: str = "", *indices: int) -> np.ndarray:
    """128-bit Philox key for the (seed, label, indices) site."""
    d = _digest(seed, label, tuple(indices))
    return np.frombuffer(d[:16], dtype=np.uint64).copy()


def stream(seed: int, label: str = "", *indices: int) -> np.random.Generator:
    """Independent generator for one named stochastic site."""
    return np.random.Generator(np.random.Philox(key=philox_key(seed, label, *indices)))


def derive_seed(seed: int, label: str = "", *indices: int) -> int:
    """Derived integer seed (63-bit) for handing to a nested site."""
    d = _digest(seed, label, tuple(indices))
    return int.from_bytes(d[:8], "little") & ((1 << 63) - 1)
