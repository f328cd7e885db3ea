"""Authority service: the single source of truth for artifact versions.

All directory mutations go through one ``Authority`` instance and are applied
one at a time. Peer notifications are published on the event bus according
to the configured strategy; every published signal is charged to the
authority's token ledger.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from coherence import bus as wire
from coherence.bus import Envelope, EventBus, tick_timestamp
from coherence.core import ArtifactMeta, LogicalClock, MESIState, checksum, validity
from coherence.errors import (
    InvariantViolation,
    LeaseExpired,
    NotOwner,
    NotShared,
    UnknownArtifact,
    UpgradeDenied,
    WriterHoldsModified,
)
from coherence.strategies import Lazy, Strategy

M, E, S, I = (MESIState.MODIFIED, MESIState.EXCLUSIVE, MESIState.SHARED,
              MESIState.INVALID)

DEFAULT_LEASE_TTL_TICKS = 30
DEFAULT_SIGNAL_TOKENS = 12


@dataclass
class Lease:
    owner: str
    granted_at_tick: int
    ttl_ticks: int

    def expired(self, now: int) -> bool:
        # strict: a commit exactly at granted + ttl still succeeds
        return self.granted_at_tick + self.ttl_ticks < now


@dataclass
class DirectoryEntry:
    artifact_id: str
    canonical_version: int
    content_size_tokens: int
    last_writer: str
    per_agent_state: dict
    lease: Optional[Lease] = None
    content: bytes = b""
    clock: Optional[LogicalClock] = None
    # peers that held a valid copy at grant and have not been told yet
    pending_notify: set = field(default_factory=set)

    def holders(self, *states: MESIState) -> list[str]:
        return sorted(a for a, s in self.per_agent_state.items() if s in states)

    def meta(self) -> ArtifactMeta:
        return ArtifactMeta(self.artifact_id, self.content_size_tokens,
                            self.canonical_version, self.last_writer,
                            checksum(self.content))


@dataclass
class TokenLedger:
    fetch_tokens: int = 0
    signal_tokens: int = 0
    fetches: int = 0
    invalidations: int = 0
    version_updates: int = 0

    @property
    def total(self) -> int:
        return self.fetch_tokens + self.signal_tokens

    @property
    def signals(self) -> int:
        return self.invalidations + self.version_updates


@dataclass(frozen=True)
class Grant:
    agent: str
    artifact_id: str
    version: int
    lease_expires_at: int
    invalidations_sent: int


def _initial_content(artifact_id: str, version: int) -> bytes:
    return f"{artifact_id}@v{version}".encode()


class Authority:
    """Global directory, ownership grants, commit serialization, lease recovery.

    ``invalidate_peers_on_grant`` exists for regression tests only: turning it
    off reproduces the directory configuration that precedes a double-writer
    violation.
    """

    def __init__(self, agents: Iterable[str], strategy: Optional[Strategy] = None,
                 bus: Optional[EventBus] = None,
                 lease_ttl_ticks: int = DEFAULT_LEASE_TTL_TICKS,
                 signal_tokens: int = DEFAULT_SIGNAL_TOKENS,
                 charge_version_updates: bool = True,
                 serve_reads_during_write: bool = True,
                 invalidate_peers_on_grant: bool = True):
        self.agents = tuple(agents)
        if len(set(self.agents)) != len(self.agents):
            raise ValueError("duplicate agent ids")
        self.strategy = strategy if strategy is not None else Lazy()
        self.bus = bus
        self.lease_ttl_ticks = lease_ttl_ticks
        self.signal_tokens = signal_tokens
        self.charge_version_updates = charge_version_updates
        self.serve_reads_during_write = serve_reads_during_write
        self.invalidate_peers_on_grant = invalidate_peers_on_grant
        self.directory: dict[str, DirectoryEntry] = {}
        self.ledger = TokenLedger()
        self.now = 0

    # -- registry ---------------------------------------------------------

    def register(self, artifact_id: str, size_tokens: int, content: Optional[bytes] = None,
                 initial_state: MESIState = I) -> ArtifactMeta:
        if size_tokens <= 0:
            raise ValueError("size_tokens must be positive")
        if artifact_id in self.directory:
            raise ValueError(f"{artifact_id!r} already registered")
        entry = DirectoryEntry(
            artifact_id=artifact_id,
            canonical_version=1,
            content_size_tokens=size_tokens,
            last_writer="authority",
            per_agent_state={a: initial_state for a in self.agents},
            content=content if content is not None else _initial_content(artifact_id, 1),
            clock=LogicalClock.zero(self.agents),
        )
        self.directory[artifact_id] = entry
        return entry.meta()

    def entry(self, artifact_id: str) -> DirectoryEntry:
        try:
            return self.directory[artifact_id]
        except KeyError:
            raise UnknownArtifact(artifact_id) from None

    def state_of(self, agent: str, artifact_id: str) -> MESIState:
        return self.entry(artifact_id).per_agent_state[agent]

    def meta(self, artifact_id: str) -> ArtifactMeta:
        return self.entry(artifact_id).meta()

    # -- control channel --------------------------------------------------

    def handle_read(self, agent: str, artifact_id: str) -> ArtifactMeta:
        """Serve the canonical version and mark the caller Shared.

        A peer in M means canonical content is one write behind; by default the
        last committed version is served (bounded staleness).
        """
        entry = self.entry(artifact_id)
        self._check_agent(agent)
        writers = [a for a in entry.holders(M) if a != agent]
        if writers and not self.serve_reads_during_write:
            raise WriterHoldsModified(f"{writers[0]} holds {artifact_id} in M")
        if entry.per_agent_state[agent] not in (E, M):
            entry.per_agent_state[agent] = S
        entry.pending_notify.discard(agent)
        self.ledger.fetches += 1
        self.ledger.fetch_tokens += entry.content_size_tokens
        self._assert_invariants(entry)
        return entry.meta()

    # Fetch and read-miss share mechanics; only the request type differs.
    handle_fetch = handle_read

    def handle_upgrade(self, agent: str, artifact_id: str) -> Grant:
        entry = self.entry(artifact_id)
        self._check_agent(agent)
        lease = entry.lease
        if lease is not None and lease.owner != agent:
            if lease.expired(self.now):
                self._recover(entry)
            else:
                raise UpgradeDenied(
                    f"{lease.owner} holds {artifact_id} until tick "
                    f"{lease.granted_at_tick + lease.ttl_ticks}")
        if entry.per_agent_state[agent] is not S:
            raise NotShared(
                f"{agent} is {entry.per_agent_state[agent].value} on {artifact_id}; "
                "upgrade requires S")

        peers = [a for a in self.agents if a != agent]
        valid_peers = [a for a in peers if validity(entry.per_agent_state[a])]
        if self.invalidate_peers_on_grant:
            for peer in peers:
                entry.per_agent_state[peer] = I
        entry.per_agent_state[agent] = E
        entry.lease = Lease(agent, self.now, self.lease_ttl_ticks)

        notify_now = self.strategy.on_upgrade_granted(peers)
        # a write that has not happened yet will produce canonical + 1
        self._signal(wire.INVALIDATE, agent, entry, entry.canonical_version + 1, notify_now)
        entry.pending_notify = set(valid_peers) - set(notify_now)
        self._assert_invariants(entry)
        return Grant(agent, artifact_id, entry.canonical_version,
                     self.now + self.lease_ttl_ticks, len(notify_now))

    def note_write(self, agent: str, artifact_id: str) -> None:
        """Owner reports a local write (E -> M). Carries no artifact tokens."""
        entry = self.entry(artifact_id)
        if entry.lease is None or entry.lease.owner != agent:
            raise NotOwner(f"{agent} does not own {artifact_id}")
        if entry.per_agent_state[agent] not in (E, M):
            raise NotOwner(f"{agent} is not the exclusive holder of {artifact_id}")
        entry.per_agent_state[agent] = M
        self._assert_invariants(entry)

    def handle_commit(self, agent: str, artifact_id: str,
                      new_size_tokens: Optional[int] = None,
                      clock: Optional[LogicalClock] = None,
                      content: Optional[bytes] = None) -> int:
        """Publish the owner's write as canonical_version + 1.

        A commit from E (ownership taken, nothing written) releases the lease
        without bumping the version.
        """
        entry = self.entry(artifact_id)
        lease = entry.lease
        if lease is None or lease.owner != agent or entry.per_agent_state[agent] not in (E, M):
            raise NotOwner(f"{agent} does not own {artifact_id}")
        if lease.expired(self.now):
            self._recover(entry)
            raise LeaseExpired(
                f"lease on {artifact_id} expired at tick "
                f"{lease.granted_at_tick + lease.ttl_ticks}; write discarded")

        if clock is not None:
            entry.clock = entry.clock.merge(clock)
        entry.lease = None

        if entry.per_agent_state[agent] is E:
            entry.per_agent_state[agent] = S
            # nothing changed: unnotified peers still hold the current version
            for peer in entry.pending_notify:
                entry.per_agent_state[peer] = S
            entry.pending_notify = set()
            self._assert_invariants(entry)
            return entry.canonical_version

        before = entry.canonical_version
        entry.canonical_version += 1
        if entry.canonical_version <= before:
            raise InvariantViolation("canonical version must increase on commit")
        if new_size_tokens is not None:
            if new_size_tokens <= 0:
                raise ValueError("new_size_tokens must be positive")
            entry.content_size_tokens = new_size_tokens
        entry.content = content if content is not None else _initial_content(
            artifact_id, entry.canonical_version)
        entry.last_writer = agent
        entry.per_agent_state[agent] = S

        invalidate = self.strategy.on_commit(sorted(entry.pending_notify))
        self._signal(wire.INVALIDATE, agent, entry, entry.canonical_version, invalidate)
        entry.pending_notify = set()
        updates = [a for a in self.agents
                   if a != agent and validity(entry.per_agent_state[a])]
        self._signal(wire.VERSION_UPDATE, agent, entry, entry.canonical_version, updates)
        self._assert_invariants(entry)
        return entry.canonical_version

    def tick_leases(self, now: int) -> list[str]:
        """Advance the authority clock and recover every orphaned lease."""
        self.now = now
        recovered = []
        for artifact_id, entry in self.directory.items():
            if entry.lease is not None and entry.lease.expired(now):
                self._recover(entry)
                recovered.append(artifact_id)
        return recovered

    # -- internals --------------------------------------------------------

    def _recover(self, entry: DirectoryEntry) -> None:
        # in-progress write is lost; everyone must re-fetch the committed version
        entry.lease = None
        entry.pending_notify = set()
        for agent in self.agents:
            entry.per_agent_state[agent] = I
        self._signal(wire.INVALIDATE, "authority", entry, entry.canonical_version,
                     list(self.agents), reason="lease_expired")
        self._assert_invariants(entry)

    def _signal(self, kind: str, origin: str, entry: DirectoryEntry, version: int,
                recipients: list[str], reason: Optional[str] = None) -> None:
        if not recipients:
            return
        if kind == wire.INVALIDATE:
            self.ledger.invalidations += len(recipients)
            self.ledger.signal_tokens += self.signal_tokens * len(recipients)
        else:
            self.ledger.version_updates += len(recipients)
            if self.charge_version_updates:
                self.ledger.signal_tokens += self.signal_tokens * len(recipients)
        if self.bus is None:
            return
        payload = {"reason": reason} if reason else {}
        for recipient in recipients:
            env = Envelope(kind, tick_timestamp(self.now), origin, entry.artifact_id,
                           version, payload)
            self.bus.publish(entry.artifact_id, env, recipients=[recipient])

    def _check_agent(self, agent: str) -> None:
        if agent not in self.agents:
            raise ValueError(f"unknown agent {agent!r}")

    def _assert_invariants(self, entry: DirectoryEntry) -> None:
        owners = entry.holders(E, M)
        if len(entry.holders(M)) > 1 or len(owners) > 1:
            raise InvariantViolation(f"multiple writers on {entry.artifact_id}: {owners}")
        if entry.lease is not None and entry.per_agent_state[entry.lease.owner] not in (E, M):
            raise InvariantViolation(f"lease owner {entry.lease.owner} is not E/M")

    def swmr_holds(self) -> bool:
        return all(len(e.holders(M)) <= 1 for e in self.directory.values())
