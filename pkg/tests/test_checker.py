import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coherence.checker import (
    MODES,
    ModelState,
    bounded_staleness,
    explore,
    single_writer,
    successors,
)
from coherence.errors import BoundsTooLarge


def labels(state, mode="correct"):
    return sorted(action for action, _ in successors(state, mode))


def test_init_successors():
    init = ModelState.init(3)
    assert labels(init) == sorted([f"{op}(a{i})" for op in ("Read", "Upgrade")
                                   for i in (1, 2, 3)])


def test_upgrade_then_write_in_correct_mode():
    init = ModelState.init(3)
    up = dict(successors(init))["Upgrade(a1)"]
    assert up.states == ("E", "I", "I")
    wr = dict(successors(up))["Write(a1)"]
    assert (wr.version, wr.states, wr.last_sync) == (2, ("M", "I", "I"), (2, 1, 1))
    assert "Fetch(a2)" in labels(wr)


def test_broken_upgrade_leaves_peers_shared():
    up = dict(successors(ModelState.init(3), "broken_upgrade"))["Upgrade(a1)"]
    assert up.states == ("E", "S", "S")


def test_unknown_mode():
    with pytest.raises(ValueError):
        list(successors(ModelState.init(2), "optimistic"))
    with pytest.raises(ValueError):
        explore(mode="optimistic")


def test_invariant_predicates():
    s = ModelState(3, ("M", "M", "I"), (0, 0, 0), (1, 1, 1))
    assert not single_writer(s)
    assert bounded_staleness(ModelState(1, ("S",), (4,), (1,)), 3)
    assert not bounded_staleness(ModelState(1, ("S",), (5,), (1,)), 3)


def test_correct_mode_is_clean():
    result = explore()
    assert result.ok
    assert result.state_count == 7168
    assert result.deadlocks == []


@pytest.mark.parametrize("step_bound", [0, 1, 2, 4])
def test_step_counters_are_independent_of_protocol_state(step_bound):
    # Read is enabled in every valid state, so the reachable set is the
    # protocol-only set times every combination of step counters
    protocol_only = explore(step_bound=0).state_count
    assert explore(step_bound=step_bound).state_count == (step_bound + 1) ** 3 * protocol_only


def test_broken_mode_two_writers():
    result = explore(mode="broken_upgrade")
    v = result.violation("SingleWriter")
    assert v is not None and v.length == 4
    assert [a for a, _ in v.trace[1:]] == ["Upgrade(a1)", "Write(a1)", "Upgrade(a2)",
                                          "Write(a2)"]
    assert v.trace[-1][1].states.count("M") == 2
    assert v.render()[0].startswith("0. Init")


def test_verbatim_mode_finds_nothing():
    assert explore(mode="broken_upgrade_verbatim").violations == []


def test_single_agent_has_no_second_writer():
    assert explore(agents=1, mode="broken_upgrade").violation("SingleWriter") is None


def test_staleness_reachable_past_budget():
    result = explore(step_bound=5)
    v = result.violation("BoundedStaleness")
    assert v is not None and v.length == 5
    assert result.state_count == 6 ** 3 * explore(step_bound=0).state_count
    assert result.violation("SingleWriter") is None


@pytest.mark.parametrize("mode", MODES)
def test_exploration_order_does_not_change_reachable_set(mode):
    forward = explore(mode=mode, keep_states=True)
    backward = explore(mode=mode, keep_states=True, reverse=True)
    assert forward.states == backward.states
    assert [v.length for v in forward.violations] == [v.length for v in backward.violations]


def test_state_cap():
    with pytest.raises(BoundsTooLarge):
        explore(max_states=100)


def test_argument_validation():
    for kw in ({"agents": 0}, {"version_bound": 0}, {"K": -1}, {"step_bound": -1}):
        with pytest.raises(ValueError):
            explore(**kw)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 3))
def test_correct_mode_never_has_two_writers(agents, vb, steps):
    result = explore(agents=agents, K=steps, version_bound=vb, keep_states=True)
    assert all(single_writer(s) for s in result.states)
    assert all(s.states.count("E") + s.states.count("M") <= 1 for s in result.states)
    assert result.violation("MonotonicVersion") is None


def test_as_dict_shape():
    d = explore(mode="broken_upgrade").as_dict()
    assert d["violations"][0]["invariant"] == "SingleWriter"
    assert d["violations"][0]["length"] == 4
