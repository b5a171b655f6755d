"""Deterministic seed derivation.

Every random draw in the simulator is keyed by a tuple of non-negative
integers, e.g. ``(master_seed, STREAM_BATCHES, client_id, round_index)``.
The tuple is mixed by :class:`numpy.random.SeedSequence` (a documented
hash-based entropy pool) and the first 64-bit word of its output is the
seed. Derived seeds therefore depend only on the key, never on execution
order, which keeps parallel and sequential runs bit-identical.
"""

from __future__ import annotations

import numpy as np

# stream tags keep independent draws from colliding
STREAM_INIT = 1
STREAM_RESAMPLE = 2
STREAM_BATCHES = 3
STREAM_DOMAIN = 4


def derive_seed(*keys: int) -> int:
    if any(int(k) < 0 for k in keys):
        raise ValueError(f"seed keys must be non-negative, got {keys}")
    ss = np.random.SeedSequence([int(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
