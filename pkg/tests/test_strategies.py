import pytest

from coherence.core import CacheEntry, MESIState
from coherence.errors import InvalidConfig
from coherence.strategies import (
    STRATEGY_NAMES,
    AccessCount,
    Broadcast,
    Eager,
    Lazy,
    Ttl,
    make_strategy,
    signal_overhead,
)

PEERS = ["a2", "a3", "a4"]


def entry(aid="plan", fetched=0, reads=0):
    return CacheEntry(aid, 1, MESIState.SHARED, reads_since_fetch=reads, fetched_at_step=fetched)


def test_grant_time_fan_out():
    assert Eager().on_upgrade_granted(PEERS) == PEERS
    assert Lazy().on_upgrade_granted(PEERS) == []
    assert Eager().on_upgrade_granted([]) == []


def test_commit_time_fan_out():
    assert Lazy().on_commit(PEERS) == PEERS
    assert Eager().on_commit(PEERS) == []
    assert signal_overhead(len(Lazy().on_commit(PEERS))) == 36
    assert Lazy().on_commit([]) == []


def test_ttl_expiry_is_inclusive():
    ttl = Ttl(10)
    assert ttl.on_step([entry(fetched=0)], 9) == []
    assert ttl.on_step([entry(fetched=0)], 10) == ["plan"]


def test_access_count_expiry():
    ac = AccessCount(8)
    assert ac.on_step([entry(reads=7)], 0) == []
    assert ac.on_step([entry(reads=8)], 0) == ["plan"]


def test_invalid_entries_never_expire():
    e = entry(reads=99)
    e.state = MESIState.INVALID
    assert AccessCount(1).on_step([e], 50) == [] == Ttl(1).on_step([e], 50)


def test_lazy_has_no_time_expiry():
    assert Lazy().on_step([entry(fetched=0, reads=100)], 10_000) == []


def test_staleness_enforcement_flags():
    assert Lazy().enforces_staleness and Ttl().enforces_staleness
    assert not Eager().enforces_staleness and not Broadcast().enforces_staleness


def test_factory_and_labels():
    assert [make_strategy(n).name for n in STRATEGY_NAMES] == list(STRATEGY_NAMES)
    assert make_strategy("ttl", ttl_steps=5) == Ttl(5)
    assert make_strategy("access_count", k=3).label() == "access_count(3)"
    assert repr(Ttl(10)) == "Ttl(ttl_steps=10)"
    assert Ttl(10) != Ttl(11) and len({Lazy(), Lazy()}) == 1
    with pytest.raises(InvalidConfig):
        make_strategy("gossip")


@pytest.mark.parametrize("factory", [lambda: Ttl(0), lambda: AccessCount(0)])
def test_parameters_must_be_positive(factory):
    with pytest.raises(InvalidConfig):
        factory()
