"""Per-agent protocol client built around a local artifact cache.

Staleness of an artifact is the number of the agent's own steps since it
last synced that artifact (fetch or commit). Reads that would exceed the
budget K refresh first, or raise in strict mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from coherence import bus as wire
from coherence.authority import Authority
from coherence.bus import Envelope
from coherence.core import (
    CacheEntry,
    CoherenceEvent,
    LogicalClock,
    MESIState,
    transition,
)
from coherence.errors import NotShared, StalenessViolation, UpgradeDenied
from coherence.strategies import Strategy

M, E, S, I = (MESIState.MODIFIED, MESIState.EXCLUSIVE, MESIState.SHARED,
              MESIState.INVALID)


@dataclass(frozen=True)
class ReadResult:
    tokens_charged: int
    from_cache: bool
    version: int


@dataclass(frozen=True)
class WriteResult:
    invalidations_emitted: int
    tokens_charged: int
    from_cache: bool


class AgentRuntime:
    """One agent's view of the shared artifacts.

    Entries start absent, which is equivalent to Invalid (cold cache).
    """

    def __init__(self, agent_id: str, authority: Authority,
                 strategy: Optional[Strategy] = None, max_stale_steps: int = 20,
                 strict: bool = False):
        self.agent_id = agent_id
        self.authority = authority
        self.strategy = strategy if strategy is not None else authority.strategy
        self.max_stale_steps = max_stale_steps
        self.strict = strict
        self.entries: dict[str, CacheEntry] = {}
        self.steps_executed = 0
        self.last_sync_step: dict[str, int] = {}
        self.clock = LogicalClock.zero(authority.agents)
        self.tokens_charged = 0
        self.hits = 0
        self.misses = 0
        self.stale_reads = 0
        self.now = 0

    # -- bookkeeping ------------------------------------------------------

    def begin_step(self, now: int) -> list[str]:
        """Advance one reasoning step and apply the strategy's expiry rule."""
        self.now = now
        self.steps_executed += 1
        expired = self.strategy.on_step(list(self.entries.values()), now)
        for artifact_id in expired:
            self._set_state(artifact_id, I)
        return expired

    def state(self, artifact_id: str) -> MESIState:
        entry = self.entries.get(artifact_id)
        return entry.state if entry is not None else I

    def staleness(self, artifact_id: str) -> int:
        return self.steps_executed - self.last_sync_step.get(artifact_id, self.steps_executed)

    def snapshot(self) -> dict:
        return {a: (e.state.value, e.version_at_fetch) for a, e in sorted(self.entries.items())}

    def _set_state(self, artifact_id: str, state: MESIState) -> None:
        self.entries[artifact_id].state = state

    def _fetch(self, artifact_id: str) -> int:
        meta = self.authority.handle_fetch(self.agent_id, artifact_id)
        entry = self.entries.get(artifact_id)
        if entry is None:
            entry = self.entries[artifact_id] = CacheEntry(artifact_id, meta.version)
        entry.state = transition(entry.state, CoherenceEvent.FETCH, True)
        entry.version_at_fetch = meta.version
        entry.reads_since_fetch = 0
        entry.fetched_at_step = self.now
        self.last_sync_step[artifact_id] = self.steps_executed
        self.tokens_charged += meta.size_tokens
        self.misses += 1
        return meta.size_tokens

    # -- operations -------------------------------------------------------

    def read(self, artifact_id: str) -> ReadResult:
        entry = self.entries.get(artifact_id)
        if entry is not None and entry.valid:
            stale = self.staleness(artifact_id) > self.max_stale_steps
            if not stale or not self.strategy.enforces_staleness:
                if stale:
                    self.stale_reads += 1
                entry.reads_since_fetch += 1
                self.hits += 1
                return ReadResult(0, True, entry.version_at_fetch)
            if self.strict:
                raise StalenessViolation(
                    f"{self.agent_id} is {self.staleness(artifact_id)} steps behind on "
                    f"{artifact_id} (K={self.max_stale_steps})")
            entry.state = I
        tokens = self._fetch(artifact_id)
        entry = self.entries[artifact_id]
        entry.reads_since_fetch += 1
        return ReadResult(tokens, False, entry.version_at_fetch)

    def write(self, artifact_id: str, retry_on_conflict: bool = True) -> WriteResult:
        """Acquire ownership if needed and write locally (entry ends in M).

        If the local Shared copy turns out to be outdated at upgrade time, the
        entry is refreshed and the upgrade retried; with ``retry_on_conflict``
        off, the refreshed entry is kept and ``NotShared`` propagates instead.
        """
        tokens = 0
        entry = self.entries.get(artifact_id)
        from_cache = entry is not None and entry.valid
        if entry is None or not entry.valid:
            tokens += self._fetch(artifact_id)
            entry = self.entries[artifact_id]
        invalidations = 0
        if entry.state is S:
            try:
                grant = self.authority.handle_upgrade(self.agent_id, artifact_id)
            except NotShared:
                # local copy outlived a peer's write; refresh, then retry once
                from_cache = False
                entry.state = I
                tokens += self._fetch(artifact_id)
                if not retry_on_conflict:
                    raise
                grant = self.authority.handle_upgrade(self.agent_id, artifact_id)
            invalidations = grant.invalidations_sent
            entry.state = transition(entry.state, CoherenceEvent.UPGRADE, True)
        entry.state = transition(entry.state, CoherenceEvent.WRITE, True)
        self.authority.note_write(self.agent_id, artifact_id)
        if from_cache:
            self.hits += 1
        return WriteResult(invalidations, tokens, from_cache)

    def commit(self, artifact_id: str, new_size_tokens: Optional[int] = None) -> int:
        entry = self.entries[artifact_id]
        self.clock = self.clock.tick(self.agent_id)
        version = self.authority.handle_commit(self.agent_id, artifact_id,
                                               new_size_tokens, clock=self.clock)
        entry.state = transition(entry.state, CoherenceEvent.COMMIT, True)
        entry.version_at_fetch = version
        entry.reads_since_fetch = 0
        entry.fetched_at_step = self.now
        self.last_sync_step[artifact_id] = self.steps_executed
        return version

    # -- event channel ----------------------------------------------------

    def handle(self, envelope: Envelope) -> bool:
        if envelope.type == wire.INVALIDATE:
            return self.on_invalidate(envelope)
        if envelope.type == wire.VERSION_UPDATE:
            return self.on_version_update(envelope)
        return False

    def on_invalidate(self, envelope: Envelope) -> bool:
        """Drop the entry to Invalid. Returns False when nothing changed.

        Copies already at or past the signalled version are kept, so late or
        duplicated deliveries are harmless.
        """
        entry = self.entries.get(envelope.artifact_id)
        if entry is None or not entry.valid:
            return False
        if envelope.agent_id == self.agent_id:
            return False
        forced = envelope.payload.get("reason") == "lease_expired"
        if not forced and entry.version_at_fetch >= envelope.version:
            return False
        if entry.state in (E, M) and not forced:
            # never drop our own in-flight write on a stale notice
            return False
        entry.state = transition(entry.state, CoherenceEvent.INVALIDATE, False)
        return True

    def on_version_update(self, envelope: Envelope) -> bool:
        # metadata only: a newer version exists, so the local copy is stale
        return self.on_invalidate(envelope)


def release_ownership(runtime: AgentRuntime, artifact_id: str) -> int:
    """Abandon an acquired-but-unwritten grant (no-op commit from E)."""
    entry = runtime.entries[artifact_id]
    if entry.state is not E:
        raise UpgradeDenied(f"{runtime.agent_id} holds {artifact_id} in {entry.state.value}")
    return runtime.commit(artifact_id)
