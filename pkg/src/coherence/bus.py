"""In-process at-least-once pub/sub with a JSON envelope wire format.

Delivery is pull-based and happens at tick boundaries: publishers enqueue,
and each subscriber drains its queue with :meth:`EventBus.deliver`. A test
mode duplicates deliveries (and optionally shuffles them within a tick) to
exercise consumer idempotence.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Iterable, Optional

from coherence.errors import MalformedMessage
from coherence.rng import SplitMix64

INVALIDATE = "INVALIDATE"
VERSION_UPDATE = "VERSION_UPDATE"
READ_REQUEST = "READ_REQUEST"
UPGRADE_REQUEST = "UPGRADE_REQUEST"
FETCH_REQUEST = "FETCH_REQUEST"
COMMIT = "COMMIT"

MESSAGE_TYPES = (INVALIDATE, VERSION_UPDATE, READ_REQUEST, UPGRADE_REQUEST,
                 FETCH_REQUEST, COMMIT)

ENVELOPE_KEYS = ("type", "timestamp", "agent_id", "artifact_id", "version", "payload")

# Simulated time has no wall clock; tick t maps to LOGICAL_EPOCH + t seconds.
LOGICAL_EPOCH = datetime(2026, 3, 5, tzinfo=timezone.utc)


def tick_timestamp(tick: int) -> str:
    return (LOGICAL_EPOCH + timedelta(seconds=tick)).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class Envelope:
    type: str
    timestamp: str
    agent_id: str
    artifact_id: str
    version: int
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_fields(self.type, self.timestamp, self.agent_id, self.artifact_id,
                      self.version, self.payload)

    def to_dict(self) -> dict:
        return {
            "type": self.type,
            "timestamp": self.timestamp,
            "agent_id": self.agent_id,
            "artifact_id": self.artifact_id,
            "version": self.version,
            "payload": self.payload,
        }

    def __hash__(self):
        return hash(serialize(self))


def _check_fields(type_, timestamp, agent_id, artifact_id, version, payload):
    if type_ not in MESSAGE_TYPES:
        raise MalformedMessage(f"unknown message type {type_!r}")
    for name, value in (("timestamp", timestamp), ("agent_id", agent_id),
                        ("artifact_id", artifact_id)):
        if not isinstance(value, str):
            raise MalformedMessage(f"{name} must be a string")
    # bool is an int subclass; reject it explicitly
    if isinstance(version, bool) or not isinstance(version, int) or version < 1:
        raise MalformedMessage(f"version must be a natural number >= 1, got {version!r}")
    if not isinstance(payload, dict):
        raise MalformedMessage("payload must be an object")
    try:
        datetime.fromisoformat(timestamp.replace("Z", "+00:00"))
    except ValueError:
        raise MalformedMessage(f"timestamp {timestamp!r} is not ISO 8601") from None


def serialize(envelope: Envelope) -> bytes:
    """Compact UTF-8 JSON with keys in wire order."""
    return json.dumps(envelope.to_dict(), separators=(",", ":"),
                      ensure_ascii=False).encode("utf-8")


def deserialize(data: bytes) -> Envelope:
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedMessage(f"not a JSON document: {exc}") from None
    if not isinstance(obj, dict):
        raise MalformedMessage("envelope must be a JSON object")
    missing = [k for k in ENVELOPE_KEYS if k not in obj]
    if missing:
        raise MalformedMessage(f"missing field(s): {', '.join(missing)}")
    extra = sorted(set(obj) - set(ENVELOPE_KEYS))
    if extra:
        raise MalformedMessage(f"unexpected field(s): {', '.join(extra)}")
    return Envelope(**{k: obj[k] for k in ENVELOPE_KEYS})


class EventBus:
    """Topic-addressed bus. Topics are artifact ids.

    ``duplicate_probability`` > 0 enqueues an extra copy of a delivery with
    that probability; ``reorder`` shuffles each subscriber's batch. Both use
    a private RNG so they never perturb the caller's random stream.
    """

    def __init__(self, duplicate_probability: float = 0.0, reorder: bool = False,
                 seed: int = 0):
        if not 0.0 <= duplicate_probability <= 1.0:
            raise ValueError("duplicate_probability must be in [0, 1]")
        self.duplicate_probability = duplicate_probability
        self.reorder = reorder
        self._rng = SplitMix64(seed)
        self._topics: dict[str, set[str]] = defaultdict(set)
        self._wildcard: set[str] = set()
        self._queues: dict[str, list[Envelope]] = {}
        self.published = 0
        self.enqueued = 0

    def subscribe(self, subscriber: str, topics: Optional[Iterable[str]] = None) -> None:
        """Register ``subscriber``; ``topics=None`` subscribes to everything."""
        self._queues.setdefault(subscriber, [])
        if topics is None:
            self._wildcard.add(subscriber)
        else:
            for topic in topics:
                self._topics[topic].add(subscriber)

    def subscribers(self, topic: str) -> list[str]:
        return sorted(self._topics.get(topic, set()) | self._wildcard)

    def publish(self, topic: str, envelope: Envelope,
                recipients: Optional[Iterable[str]] = None) -> int:
        """Enqueue for every subscriber of ``topic`` (restricted to ``recipients``).

        Returns the number of subscribers addressed.
        """
        targets = self.subscribers(topic)
        if recipients is not None:
            wanted = set(recipients)
            targets = [t for t in targets if t in wanted]
        self.published += 1
        for target in targets:
            queue = self._queues[target]
            queue.append(envelope)
            self.enqueued += 1
            if self.duplicate_probability and self._rng.random() < self.duplicate_probability:
                queue.append(envelope)
                self.enqueued += 1
        return len(targets)

    def deliver(self, subscriber: str) -> list[Envelope]:
        if subscriber not in self._queues:
            raise KeyError(f"{subscriber!r} is not subscribed")
        batch = self._queues[subscriber]
        self._queues[subscriber] = []
        if self.reorder:
            self._rng.shuffle(batch)
        return batch

    def pending(self) -> int:
        return sum(len(q) for q in self._queues.values())
