import pytest

from coherence import bus as wire
from coherence.authority import Authority
from coherence.bus import Envelope, EventBus
from coherence.core import MESIState
from coherence.errors import NotShared, StalenessViolation, UpgradeDenied
from coherence.runtime import AgentRuntime, release_ownership
from coherence.strategies import AccessCount, Eager, Lazy, Ttl

M, E, S, I = MESIState.MODIFIED, MESIState.EXCLUSIVE, MESIState.SHARED, MESIState.INVALID


def setup(strategy=None, agents=("a1", "a2", "a3"), **kw):
    bus = EventBus()
    for a in agents:
        bus.subscribe(a)
    auth = Authority(agents, strategy or Lazy(), bus)
    auth.register("plan", 1000)
    rts = {a: AgentRuntime(a, auth, **kw) for a in agents}
    return auth, bus, rts


def pump(bus, rts):
    for a, rt in rts.items():
        for msg in bus.deliver(a):
            rt.handle(msg)


def test_read_miss_then_hit():
    _, _, rts = setup()
    rt = rts["a1"]
    rt.begin_step(1)
    first = rt.read("plan")
    second = rt.read("plan")
    assert (first.tokens_charged, first.from_cache) == (1000, False)
    assert (second.tokens_charged, second.from_cache) == (0, True)
    assert (rt.hits, rt.misses) == (1, 1)


def test_write_commit_and_peer_invalidation():
    auth, bus, rts = setup()
    for rt in rts.values():
        rt.read("plan")
    w = rts["a1"].write("plan")
    assert w.from_cache and w.tokens_charged == 0
    assert rts["a1"].state("plan") is M
    assert rts["a1"].commit("plan") == 2
    assert rts["a1"].state("plan") is S
    pump(bus, rts)
    assert rts["a2"].state("plan") is I and rts["a3"].state("plan") is I
    assert rts["a2"].read("plan").version == 2
    assert auth.ledger.signal_tokens == 24


def test_write_on_cold_cache_fetches_first():
    _, _, rts = setup()
    w = rts["a2"].write("plan")
    assert (w.tokens_charged, w.from_cache) == (1000, False)


def env(sender, version, reason=None):
    payload = {"reason": reason} if reason else {}
    return Envelope(wire.INVALIDATE, "2026-03-05T00:00:00Z", sender, "plan", version, payload)


def test_invalidate_ignore_rules():
    _, _, rts = setup()
    rt = rts["a2"]
    assert not rt.on_invalidate(env("a1", 2))  # no entry
    rt.read("plan")
    assert not rt.on_invalidate(env("a2", 2))  # own echo
    assert not rt.on_invalidate(env("a1", 1))  # already at that version
    assert rt.on_invalidate(env("a1", 2))
    assert not rt.on_invalidate(env("a1", 2))  # duplicate
    assert rt.state("plan") is I


def test_invalidate_spares_in_flight_write_unless_forced():
    _, _, rts = setup()
    rt = rts["a1"]
    rt.read("plan")
    rt.write("plan")
    assert not rt.on_invalidate(env("a3", 5))
    assert rt.state("plan") is M
    assert rt.on_invalidate(env("a3", 1, reason="lease_expired"))
    assert rt.state("plan") is I


def test_version_update_marks_stale():
    _, _, rts = setup()
    rts["a2"].read("plan")
    msg = Envelope(wire.VERSION_UPDATE, "2026-03-05T00:00:00Z", "a1", "plan", 2, {})
    assert rts["a2"].handle(msg)
    assert rts["a2"].state("plan") is I


def test_staleness_budget_forces_refresh():
    _, _, rts = setup(max_stale_steps=2)
    rt = rts["a1"]
    rt.begin_step(1)
    rt.read("plan")
    for t in (2, 3):
        rt.begin_step(t)
        assert rt.read("plan").from_cache
    rt.begin_step(4)
    assert rt.staleness("plan") == 3
    assert not rt.read("plan").from_cache
    assert rt.staleness("plan") == 0


def test_strict_mode_raises():
    _, _, rts = setup(max_stale_steps=0, strict=True)
    rt = rts["a1"]
    rt.read("plan")
    rt.begin_step(1)
    with pytest.raises(StalenessViolation):
        rt.read("plan")


def test_eager_counts_stale_reads_instead():
    _, _, rts = setup(Eager(), max_stale_steps=0)
    rt = rts["a1"]
    rt.read("plan")
    rt.begin_step(1)
    assert rt.read("plan").from_cache
    assert rt.stale_reads == 1


@pytest.mark.parametrize("strategy", [Ttl(ttl_steps=2), AccessCount(k=2)])
def test_strategy_expiry_through_begin_step(strategy):
    _, _, rts = setup(strategy)
    rt = rts["a1"]
    rt.begin_step(0)
    rt.read("plan")
    rt.read("plan")
    expired = []
    for t in range(1, 4):
        expired += rt.begin_step(t)
    assert expired == ["plan"]
    assert rt.state("plan") is I


def test_release_ownership():
    auth, _, rts = setup()
    for rt in rts.values():
        rt.read("plan")
    auth.handle_upgrade("a1", "plan")
    rts["a1"].entries["plan"].state = E
    assert release_ownership(rts["a1"], "plan") == 1
    with pytest.raises(UpgradeDenied):
        release_ownership(rts["a2"], "plan")


def test_conflict_retry_and_no_retry():
    for retry in (True, False):
        auth, bus, rts = setup()
        for rt in rts.values():
            rt.read("plan")
        rts["a1"].write("plan")
        rts["a1"].commit("plan")
        # a2 has not processed the invalidation yet, so its S copy is outdated
        if retry:
            w = rts["a2"].write("plan")
            assert not w.from_cache and w.tokens_charged == 1000
            assert rts["a2"].state("plan") is M
        else:
            with pytest.raises(NotShared):
                rts["a2"].write("plan", retry_on_conflict=False)
            assert rts["a2"].state("plan") is S
            assert rts["a2"].entries["plan"].version_at_fetch == 2
