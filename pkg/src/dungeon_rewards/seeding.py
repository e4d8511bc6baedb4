"""Deterministic derivation of independent child seeds."""

from __future__ import annotations

import numpy as np


def derive_seed(*parts: int) -> int:
    """63-bit seed derived from an integer path such as ``(run_seed, iteration, i)``.

    Derived seeds depend only on the path, so serial and parallel execution
    draw identical streams.
    """
    ss = np.random.SeedSequence([int(p) & 0xFFFFFFFFFFFFFFFF for p in parts])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
