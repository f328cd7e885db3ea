"""MESI-style artifact coherence for multi-agent orchestration.

Authority directory, per-agent caches, pluggable invalidation strategies,
a seeded token-cost simulator and an explicit-state invariant checker.
"""

from coherence.core import (
    CacheEntry,
    CoherenceEvent,
    LogicalClock,
    MESIState,
    transition,
    validity,
)
from coherence.errors import CoherenceError

__version__ = "0.1.0"

__all__ = [
    "CacheEntry",
    "CoherenceError",
    "CoherenceEvent",
    "LogicalClock",
    "MESIState",
    "transition",
    "validity",
]
