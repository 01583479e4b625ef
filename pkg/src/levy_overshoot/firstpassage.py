"""Crossing primitives shared by the path engines."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional


def linear_crossing(value0: float, slope: float, level: float) -> Optional[float]:
    """Time for ``value0 + slope * t`` to reach ``level``; None if it never does."""
    if value0 >= level:
        raise ValueError("linear_crossing needs value0 < level")
    if slope > 0:
        return (level - value0) / slope
    return None


@dataclass(frozen=True)
class BridgeQuery:
    sigma: float
    dt: float
    gap_start: float
    gap_end: float

    def __post_init__(self):
        if not (self.sigma > 0 and self.dt > 0):
            raise ValueError("sigma and dt must be positive")
        if self.gap_start < 0 or self.gap_end < 0:
            raise ValueError("gaps must be non-negative")


def bridge_crossing_prob(q: BridgeQuery) -> float:
    """Probability that a Brownian bridge with the given endpoint gaps touches the level."""
    return math.exp(-2.0 * q.gap_start * q.gap_end / (q.sigma * q.sigma * q.dt))
