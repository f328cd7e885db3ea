import pytest
from hypothesis import given
from hypothesis import strategies as st

from coherence.core import (
    ArtifactMeta,
    CacheEntry,
    CoherenceEvent,
    LogicalClock,
    MESIState,
    checksum,
    clock_merge,
    transition,
    validity,
)
from coherence.errors import IllegalTransition, MismatchedAgentSets

M, E, S, I = MESIState.MODIFIED, MESIState.EXCLUSIVE, MESIState.SHARED, MESIState.INVALID
R, W, U, F, X, C = (CoherenceEvent.READ, CoherenceEvent.WRITE, CoherenceEvent.UPGRADE,
                    CoherenceEvent.FETCH, CoherenceEvent.INVALIDATE, CoherenceEvent.COMMIT)

# Hand-built from the stable-state protocol; None marks an illegal pair.
SELF = {
    (M, R): M, (E, R): E, (S, R): S, (I, R): None,
    (M, W): M, (E, W): M, (S, W): None, (I, W): None,
    (M, U): None, (E, U): None, (S, U): E, (I, U): None,
    (M, F): None, (E, F): None, (S, F): None, (I, F): S,
    (M, X): I, (E, X): I, (S, X): I, (I, X): I,
    (M, C): S, (E, C): S, (S, C): None, (I, C): None,
}
PEER = {(s, e): (s if e in (R, F) else I) for s in MESIState for e in CoherenceEvent}

CASES = [(s, e, True, SELF[s, e]) for s in MESIState for e in CoherenceEvent] + \
        [(s, e, False, PEER[s, e]) for s in MESIState for e in CoherenceEvent]


def test_case_count_is_exhaustive():
    assert len(CASES) == 4 * 6 * 2


@pytest.mark.parametrize("state,event,is_self,expected", CASES,
                         ids=[f"{s.value}-{e.value}-{'self' if me else 'peer'}"
                              for s, e, me, _ in CASES])
def test_transition_table(state, event, is_self, expected):
    if expected is None:
        with pytest.raises(IllegalTransition) as info:
            transition(state, event, is_self)
        assert info.value.state is state and info.value.event is event
    else:
        assert transition(state, event, is_self) is expected


def test_examples():
    assert transition(I, F, True) is S
    assert transition(M, C, True) is S
    assert transition(S, X, False) is I
    with pytest.raises(IllegalTransition):
        transition(S, W, True)


def test_validity():
    assert validity(I) is False
    assert all(validity(s) for s in (M, E, S))


def test_fetch_always_lands_valid():
    for s in MESIState:
        try:
            assert validity(transition(s, F, True))
        except IllegalTransition:
            pass


@given(st.lists(st.tuples(st.sampled_from(list(CoherenceEvent)), st.booleans()), max_size=40))
def test_closure_under_random_sequences(seq):
    state = S
    for event, is_self in seq:
        try:
            state = transition(state, event, is_self)
        except IllegalTransition:
            continue
        assert state in (M, E, S, I)


AGENTS = ("a", "b", "c")
clocks = st.tuples(*[st.integers(0, 50)] * 3).map(
    lambda t: LogicalClock(dict(zip(AGENTS, t))))


@given(clocks, clocks, clocks)
def test_merge_is_a_semilattice(x, y, z):
    assert clock_merge(x, y) == clock_merge(y, x)
    assert clock_merge(clock_merge(x, y), z) == clock_merge(x, clock_merge(y, z))
    assert clock_merge(x, x) == x
    m = clock_merge(x, y)
    assert m.dominates(x) and m.dominates(y)


def test_merge_examples():
    a = LogicalClock({"a": 1, "b": 2})
    b = LogicalClock({"a": 3, "b": 0})
    assert clock_merge(a, b) == LogicalClock({"a": 3, "b": 2})
    zero = LogicalClock.zero(["a", "b"])
    assert clock_merge(zero, LogicalClock({"a": 5, "b": 7})) == LogicalClock({"a": 5, "b": 7})
    assert a.concurrent_with(b)


def test_merge_rejects_different_agents():
    with pytest.raises(MismatchedAgentSets):
        LogicalClock({"a": 1}).merge(LogicalClock({"b": 1}))


def test_tick_is_immutable():
    c = LogicalClock.zero(AGENTS)
    d = c.tick("a")
    assert c["a"] == 0 and d["a"] == 1 and d.dominates(c)


def test_artifact_meta_and_checksum():
    meta = ArtifactMeta("plan", 4096, 3, "a1", checksum(b"x"))
    assert list(meta.to_dict()) == ["artifact_id", "version", "checksum", "size_tokens",
                                    "last_modified_by"]
    assert checksum(b"x") == checksum(b"x") != checksum(b"y")
    assert checksum(b"x").startswith("sha256:")
    with pytest.raises(ValueError):
        ArtifactMeta("plan", 0, 1, "a1", checksum(b""))


def test_cache_entry_defaults():
    entry = CacheEntry("plan", 1)
    assert entry.state is I and not entry.valid and entry.reads_since_fetch == 0
