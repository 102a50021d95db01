"""Seed derivation helpers.

All randomness in the package flows through numpy's counter-based Philox
bit generator. Child seeds are derived with SeedSequence spawn keys, so a
root seed expands into independent, platform-stable streams and adding a
new consumer never perturbs existing ones.
"""

from __future__ import annotations

import numpy as np


def derive_seed(base: int, *key: int) -> int:
    """Deterministic child seed for the given derivation path."""
    seq = np.random.SeedSequence(int(base), spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(1, np.uint64)[0])


def philox(seed: int) -> np.random.Generator:
    """A Philox-backed generator for the given seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
