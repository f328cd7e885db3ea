"""Explicit-state breadth-first checker for the one-artifact protocol model.

The model has four variables: the canonical version, each agent's MESI
state, each agent's step counter and each agent's version at last sync.
Versions and step counters are unbounded in the model, so exploration prunes
successors above ``version_bound`` / ``step_bound``. A state whose only
enabled successors were pruned sits on the exploration boundary and is not
reported as a deadlock.

Modes:

``correct``
    Upgrade and Write both invalidate every peer.
``broken_upgrade``
    Neither Upgrade nor Write touches peer states, so two agents can reach E
    and then both write.
``broken_upgrade_verbatim``
    Only Upgrade skips peer invalidation. Write still invalidates peers, which
    demotes the second E holder before it can write; no two-M state is
    reachable in this mode.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional

from coherence.errors import BoundsTooLarge

MODES = ("correct", "broken_upgrade", "broken_upgrade_verbatim")
INVARIANTS = ("SingleWriter", "MonotonicVersion", "BoundedStaleness")
DEFAULT_MAX_STATES = 1_000_000


class ModelState(NamedTuple):
    version: int
    states: tuple      # "M" | "E" | "S" | "I" per agent
    steps: tuple
    last_sync: tuple

    @classmethod
    def init(cls, agents: int) -> "ModelState":
        return cls(1, ("S",) * agents, (0,) * agents, (1,) * agents)

    def render(self) -> str:
        cells = " ".join(f"a{i + 1}={s}/{st}/{ls}" for i, (s, st, ls)
                         in enumerate(zip(self.states, self.steps, self.last_sync)))
        return f"v{self.version} {cells}"


def _put(t: tuple, i: int, value) -> tuple:
    return t[:i] + (value,) + t[i + 1:]


def successors(state: ModelState, mode: str = "correct") -> Iterator[tuple[str, ModelState]]:
    """Every enabled (action, next state) pair, bounds not applied."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    n = len(state.states)
    invalidate_on_upgrade = mode == "correct"
    invalidate_on_write = mode != "broken_upgrade"
    for a in range(n):
        label = f"a{a + 1}"
        st = state.states[a]
        if st != "I":
            yield f"Read({label})", state._replace(steps=_put(state.steps, a, state.steps[a] + 1))
        if st in ("E", "M"):
            version = state.version + 1
            if invalidate_on_write:
                states = tuple("M" if x == a else "I" for x in range(n))
            else:
                states = _put(state.states, a, "M")
            yield f"Write({label})", state._replace(
                version=version, states=states,
                last_sync=_put(state.last_sync, a, version))
        if st == "I":
            yield f"Fetch({label})", state._replace(
                states=_put(state.states, a, "S"),
                last_sync=_put(state.last_sync, a, state.version))
        if st == "S":
            if invalidate_on_upgrade:
                states = tuple("E" if x == a else "I" for x in range(n))
            else:
                states = _put(state.states, a, "E")
            yield f"Upgrade({label})", state._replace(states=states)


def single_writer(state: ModelState) -> bool:
    return sum(1 for s in state.states if s == "M") <= 1


def bounded_staleness(state: ModelState, K: int) -> bool:
    # verbatim: steps minus the version number at last sync
    return all(st - ls <= K for st, ls in zip(state.steps, state.last_sync))


@dataclass(frozen=True)
class Violation:
    invariant: str
    trace: tuple        # ((action, state), ...) starting with ("Init", init)

    @property
    def length(self) -> int:
        """Number of transitions in the trace."""
        return len(self.trace) - 1

    def render(self) -> list[str]:
        return [f"{i}. {action:<12} {st.render()}" for i, (action, st) in enumerate(self.trace)]


@dataclass
class CheckResult:
    agents: int
    K: int
    version_bound: int
    step_bound: int
    mode: str
    state_count: int
    transitions: int
    violations: list = field(default_factory=list)
    deadlocks: list = field(default_factory=list)
    boundary_states: int = 0
    states: Optional[frozenset] = None

    @property
    def ok(self) -> bool:
        return not self.violations and not self.deadlocks

    def violation(self, invariant: str) -> Optional[Violation]:
        return next((v for v in self.violations if v.invariant == invariant), None)

    def as_dict(self) -> dict:
        return {
            "agents": self.agents,
            "K": self.K,
            "version_bound": self.version_bound,
            "step_bound": self.step_bound,
            "mode": self.mode,
            "state_count": self.state_count,
            "transitions": self.transitions,
            "boundary_states": self.boundary_states,
            "deadlocks": len(self.deadlocks),
            "violations": [{"invariant": v.invariant, "length": v.length,
                            "trace": [a for a, _ in v.trace[1:]]}
                           for v in self.violations],
        }


def explore(agents: int = 3, K: int = 3, version_bound: int = 3,
            step_bound: Optional[int] = None, mode: str = "correct",
            max_states: int = DEFAULT_MAX_STATES, keep_states: bool = False,
            reverse: bool = False) -> CheckResult:
    """Exhaustive BFS within bounds.

    ``step_bound`` defaults to K. Version 3 is the smallest bound that admits
    a second write, which the two-writer counterexample needs. ``reverse``
    expands successors in reverse order; the reachable set must not change.
    Only the first (hence shortest) violation of each invariant is kept.
    """
    if agents < 1 or version_bound < 1 or K < 0:
        raise ValueError("agents and version_bound must be >= 1, K >= 0")
    if step_bound is None:
        step_bound = K
    if step_bound < 0:
        raise ValueError("step_bound must be >= 0")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")

    init = ModelState.init(agents)
    parent: dict[ModelState, Optional[tuple[str, ModelState]]] = {init: None}
    queue = deque([init])
    found: dict[str, Violation] = {}
    deadlocks: list[ModelState] = []
    boundary = transitions = 0

    def trace_to(state: ModelState, extra: Optional[tuple[str, ModelState]] = None) -> tuple:
        steps = [] if extra is None else [extra]
        cur = state
        while parent[cur] is not None:
            action, prev = parent[cur]
            steps.append((action, cur))
            cur = prev
        steps.append(("Init", init))
        return tuple(reversed(steps))

    def check_state(state: ModelState) -> None:
        if "SingleWriter" not in found and not single_writer(state):
            found["SingleWriter"] = Violation("SingleWriter", trace_to(state))
        if "BoundedStaleness" not in found and not bounded_staleness(state, K):
            found["BoundedStaleness"] = Violation("BoundedStaleness", trace_to(state))

    check_state(init)
    while queue:
        state = queue.popleft()
        succ = list(successors(state, mode))
        if reverse:
            succ.reverse()
        if not succ:
            deadlocks.append(state)
            continue
        kept = 0
        for action, nxt in succ:
            if nxt.version < state.version and "MonotonicVersion" not in found:
                found["MonotonicVersion"] = Violation(
                    "MonotonicVersion", trace_to(state, (action, nxt)))
            if nxt.version > version_bound or max(nxt.steps) > step_bound:
                continue
            kept += 1
            transitions += 1
            if nxt in parent:
                continue
            parent[nxt] = (action, state)
            if len(parent) > max_states:
                raise BoundsTooLarge(
                    f"more than {max_states} states with version_bound={version_bound}, "
                    f"step_bound={step_bound}")
            check_state(nxt)
            queue.append(nxt)
        if kept == 0:
            boundary += 1

    violations = [found[name] for name in INVARIANTS if name in found]
    return CheckResult(agents, K, version_bound, step_bound, mode, len(parent), transitions,
                       violations, deadlocks, boundary,
                       frozenset(parent) if keep_states else None)
