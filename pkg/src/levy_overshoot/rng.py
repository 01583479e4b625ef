"""Per-replicate random streams.

Every replicate owns a generator derived from ``(seed, *tag, index)`` through
:class:`numpy.random.SeedSequence`, so results never depend on the order in
which replicates are executed or on how they are split across workers.
"""
from __future__ import annotations

import numpy as np


def replicate_stream(seed: int, index: int, tag: tuple = ()) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) % 2**64, spawn_key=(*tag, int(index)))
    return np.random.Generator(np.random.PCG64(ss))
