"""Stable-state MESI machine over agent-artifact pairs.

Only quiescent states are modelled; every transition is atomic.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional

from coherence.errors import IllegalTransition, MismatchedAgentSets


class MESIState(str, Enum):
    MODIFIED = "M"
    EXCLUSIVE = "E"
    SHARED = "S"
    INVALID = "I"


class CoherenceEvent(str, Enum):
    READ = "read"
    WRITE = "write"
    UPGRADE = "upgrade"
    FETCH = "fetch"
    INVALIDATE = "invalidate"
    COMMIT = "commit"


M, E, S, I = (MESIState.MODIFIED, MESIState.EXCLUSIVE, MESIState.SHARED,
              MESIState.INVALID)

VALID_STATES = frozenset({M, E, S})


def validity(state: MESIState) -> bool:
    """False only for Invalid, which needs a fetch before use."""
    return state is not I


# (event, is_self) -> {from_state: to_state}. Missing pairs are illegal.
_SELF_TABLE = {
    CoherenceEvent.READ: {M: M, E: E, S: S},
    CoherenceEvent.WRITE: {E: M, M: M},
    CoherenceEvent.UPGRADE: {S: E},
    CoherenceEvent.FETCH: {I: S},
    CoherenceEvent.INVALIDATE: {M: I, E: I, S: I, I: I},
    # commit from E is the no-op commit of an abandoned write
    CoherenceEvent.COMMIT: {M: S, E: S},
}

_ALL_TO_INVALID = {M: I, E: I, S: I, I: I}
_UNCHANGED = {M: M, E: E, S: S, I: I}

_PEER_TABLE = {
    CoherenceEvent.READ: _UNCHANGED,
    CoherenceEvent.FETCH: _UNCHANGED,
    CoherenceEvent.WRITE: _ALL_TO_INVALID,
    CoherenceEvent.UPGRADE: _ALL_TO_INVALID,
    CoherenceEvent.INVALIDATE: _ALL_TO_INVALID,
    CoherenceEvent.COMMIT: _ALL_TO_INVALID,
}


def transition(state: MESIState, event: CoherenceEvent, is_self: bool) -> MESIState:
    """Successor state of one agent's entry when ``event`` happens.

    ``is_self`` is True when the agent owning the entry performs the event,
    False when a peer does (the authority relays the peer's effect).
    Raises IllegalTransition for guard violations, e.g. WRITE from SHARED
    (an upgrade must come first) or READ from INVALID (fetch first).
    """
    table = _SELF_TABLE if is_self else _PEER_TABLE
    try:
        return table[CoherenceEvent(event)][MESIState(state)]
    except KeyError:
        raise IllegalTransition(MESIState(state), CoherenceEvent(event), is_self) from None


def checksum(content: bytes) -> str:
    return "sha256:" + hashlib.sha256(content).hexdigest()


@dataclass(frozen=True)
class ArtifactMeta:
    artifact_id: str
    size_tokens: int
    version: int
    last_modified_by: str
    checksum: str

    def __post_init__(self):
        if self.size_tokens <= 0:
            raise ValueError("size_tokens must be positive")

    def to_dict(self) -> dict:
        # key order follows the fetch-response wire format
        return {
            "artifact_id": self.artifact_id,
            "version": self.version,
            "checksum": self.checksum,
            "size_tokens": self.size_tokens,
            "last_modified_by": self.last_modified_by,
        }


@dataclass
class CacheEntry:
    artifact_id: str
    version_at_fetch: int
    state: MESIState = MESIState.INVALID
    reads_since_fetch: int = 0
    fetched_at_step: int = 0
    expires_at_step: Optional[int] = None

    @property
    def valid(self) -> bool:
        return validity(self.state)


class LogicalClock:
    """Vector clock, one counter per agent. Immutable; operations return new clocks."""

    __slots__ = ("_counters",)

    def __init__(self, counters: Mapping[str, int]):
        for agent, value in counters.items():
            if value < 0:
                raise ValueError(f"negative counter for {agent!r}")
        self._counters = dict(counters)

    @classmethod
    def zero(cls, agents) -> "LogicalClock":
        return cls({a: 0 for a in agents})

    @property
    def agents(self) -> frozenset:
        return frozenset(self._counters)

    def __getitem__(self, agent: str) -> int:
        return self._counters[agent]

    def as_dict(self) -> dict:
        return dict(self._counters)

    def tick(self, agent: str) -> "LogicalClock":
        if agent not in self._counters:
            raise MismatchedAgentSets(f"{agent!r} is not in this clock")
        counters = dict(self._counters)
        counters[agent] += 1
        return LogicalClock(counters)

    def merge(self, other: "LogicalClock") -> "LogicalClock":
        if self.agents != other.agents:
            raise MismatchedAgentSets(
                f"cannot merge clocks over {sorted(self.agents)} and {sorted(other.agents)}")
        return LogicalClock({a: max(v, other[a]) for a, v in self._counters.items()})

    def dominates(self, other: "LogicalClock") -> bool:
        if self.agents != other.agents:
            raise MismatchedAgentSets("clocks range over different agents")
        return all(v >= other[a] for a, v in self._counters.items())

    def concurrent_with(self, other: "LogicalClock") -> bool:
        return not self.dominates(other) and not other.dominates(self)

    def __eq__(self, other):
        if not isinstance(other, LogicalClock):
            return NotImplemented
        return self._counters == other._counters

    def __hash__(self):
        return hash(frozenset(self._counters.items()))

    def __repr__(self):
        inner = ", ".join(f"{a}:{v}" for a, v in sorted(self._counters.items()))
        return f"LogicalClock({{{inner}}})"


def clock_merge(local: LogicalClock, remote: LogicalClock) -> LogicalClock:
    return local.merge(remote)
