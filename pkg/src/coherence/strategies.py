"""Invalidation-timing policies.

A strategy only decides *when peers are told*. The authority marks peers
Invalid in its directory at upgrade grant under every strategy, so single
writer safety never depends on the policy in use.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from coherence.errors import InvalidConfig


class Strategy:
    name = "base"
    # Whether agent reads refresh entries older than K steps since last sync.
    enforces_staleness = True

    def on_upgrade_granted(self, peers: Iterable[str]) -> list[str]:
        """Peers to send INVALIDATE to at the moment ownership is granted."""
        return []

    def on_commit(self, peers: Iterable[str]) -> list[str]:
        """Peers to send INVALIDATE to when the write is committed.

        ``peers`` are those holding a valid copy when the write began.
        """
        return []

    def on_step(self, entries, now: int) -> list[str]:
        """Artifact ids whose cache entries expire to Invalid at tick ``now``."""
        return []

    def params(self) -> dict:
        return {}

    def label(self) -> str:
        return self.name

    def __eq__(self, other):
        return type(self) is type(other) and self.params() == other.params()

    def __hash__(self):
        return hash((self.name, tuple(sorted(self.params().items()))))

    def __repr__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class Broadcast(Strategy):
    """Full-state rebroadcast every step. No upgrades, so no hooks fire."""

    name = "broadcast"
    enforces_staleness = False


class Eager(Strategy):
    name = "eager"
    # Eager keeps no staleness budget; stale reads are counted, not refreshed.
    enforces_staleness = False

    def on_upgrade_granted(self, peers):
        return list(peers)


class Lazy(Strategy):
    name = "lazy"

    def on_commit(self, peers):
        return list(peers)


@dataclass(frozen=True, eq=False)
class Ttl(Lazy):
    ttl_steps: int = 10
    name = "ttl"

    def __post_init__(self):
        if self.ttl_steps < 1:
            raise InvalidConfig("ttl_steps must be >= 1")

    def on_step(self, entries, now):
        return [e.artifact_id for e in entries
                if e.valid and now - e.fetched_at_step >= self.ttl_steps]

    def params(self):
        return {"ttl_steps": self.ttl_steps}

    def label(self):
        return f"ttl({self.ttl_steps})"


@dataclass(frozen=True, eq=False)
class AccessCount(Lazy):
    k: int = 8
    name = "access_count"

    def __post_init__(self):
        if self.k < 1:
            raise InvalidConfig("k must be >= 1")

    def on_step(self, entries, now):
        return [e.artifact_id for e in entries
                if e.valid and e.reads_since_fetch >= self.k]

    def params(self):
        return {"k": self.k}

    def label(self):
        return f"access_count({self.k})"


STRATEGY_NAMES = ("broadcast", "eager", "lazy", "ttl", "access_count")


def make_strategy(name: str, ttl_steps: int = 10, k: int = 8) -> Strategy:
    if name == "broadcast":
        return Broadcast()
    if name == "eager":
        return Eager()
    if name == "lazy":
        return Lazy()
    if name == "ttl":
        return Ttl(ttl_steps)
    if name == "access_count":
        return AccessCount(k)
    raise InvalidConfig(f"unknown strategy {name!r}; expected one of {', '.join(STRATEGY_NAMES)}")


def signal_overhead(count: int, tokens_per_signal: int = 12) -> int:
    return count * tokens_per_signal
