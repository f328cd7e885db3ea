import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coherence.errors import InvalidConfig
from coherence.sim import (
    ScenarioConfig,
    run_scenario,
    simulate,
    simulate_broadcast,
    simulate_coherent,
    sweep,
)

BASE = ScenarioConfig(name="t", runs=3, seed=11)


@pytest.mark.parametrize("changes", [
    {"n": 0}, {"m": 0}, {"artifact_tokens": 0}, {"runs": 0}, {"S": -1}, {"V": 1.5},
    {"V": -0.1}, {"p": 2.0}, {"strategy": "write-back"}, {"access_model": "mmap"},
    {"ttl_steps": 0}, {"n": True}, {"seed": -3},
])
def test_invalid_configs_rejected(changes):
    with pytest.raises(InvalidConfig):
        BASE.with_(**changes)


def test_p_zero_is_allowed():
    assert BASE.with_(p=0.0).p == 0.0


def test_identifiers():
    cfg = BASE.with_(n=10, m=3)
    assert cfg.agents[0] == "a01" and cfg.agents[-1] == "a10"
    assert cfg.artifacts == ["d1", "d2", "d3"]


def test_runs_are_deterministic():
    assert simulate(BASE, 2) == simulate(BASE, 2)
    assert simulate(BASE, 1) != simulate(BASE, 2)


def test_run_seed_is_base_plus_index():
    assert simulate_coherent(BASE, 4).seed == 15


def test_no_writes_costs_at_most_one_cold_fetch_per_copy():
    cfg = BASE.with_(V=0.0, K=40)
    for run in run_scenario(cfg).runs:
        assert run.signal_tokens == 0
        assert run.sync_tokens <= cfg.n * cfg.m * cfg.artifact_tokens == 49_152


def test_broadcast_without_idle_agents_matches_formula():
    cfg = BASE.with_(p=0.0, strategy="broadcast")
    assert simulate_broadcast(cfg).sync_tokens == cfg.broadcast_cost() == 1_966_080


def test_two_agent_broadcast_cost():
    assert BASE.with_(n=2).broadcast_cost() == 983_040


def test_broadcast_overshoot_is_small():
    cfg = BASE
    for run in run_scenario(cfg).baseline:
        ratio = run.sync_tokens / cfg.broadcast_cost()
        assert 1.0 <= ratio <= 1.02


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["lazy", "eager", "access_count", "ttl"]),
       st.sampled_from([0.0, 0.05, 0.25, 0.5, 1.0]),
       st.integers(0, 2**32))
def test_runs_respect_upper_bound(strategy, V, seed):
    cfg = BASE.with_(strategy=strategy, V=V, seed=seed, runs=1, S=20, K=20)
    run = simulate_coherent(cfg)
    assert run.sync_tokens <= run.upper_bound(cfg)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(["lazy", "eager", "ttl"]))
def test_token_accounting_identities(seed, strategy):
    cfg = BASE.with_(seed=seed, strategy=strategy, runs=1, S=15)
    run = simulate_coherent(cfg)
    assert run.sync_tokens == run.fetch_tokens + run.signal_tokens
    assert run.fetch_tokens == run.fetch_count * cfg.artifact_tokens
    signals = run.invalidations_sent + run.version_updates_sent
    assert run.signal_tokens == 12 * signals
    assert run.writes_committed == sum(run.writes_per_artifact)
    assert run.chr == run.cache_hits / (run.cache_hits + run.cache_misses)


def test_duplicate_delivery_changes_nothing():
    single = run_scenario(BASE)
    dup = run_scenario(BASE.with_(duplicate_probability=1.0))
    assert [r.sync_tokens for r in single.runs] == [r.sync_tokens for r in dup.runs]
    assert [r.final_states for r in single.runs] == [r.final_states for r in dup.runs]


def test_single_run_has_zero_sigma():
    result = run_scenario(BASE.with_(runs=1))
    assert result.savings[1] == 0.0 and result.coherent_tokens[1] == 0.0


def test_summary_figures():
    result = run_scenario(BASE)
    mean, _ = result.savings
    assert mean == pytest.approx(sum(result.per_run_savings) / 3)
    assert result.crr == pytest.approx(result.coherent_tokens[0] / result.broadcast_tokens[0])
    assert result.bound == pytest.approx(1 - 4 / 40 - 0.05)
    assert result.bound_violations() == []
    assert set(result.summary()) >= {"savings", "crr", "chr"}


def test_bound_is_none_without_steps():
    assert BASE.with_(S=0).bound() is None


def test_sweep_errors():
    with pytest.raises(InvalidConfig):
        sweep(BASE, "K", [1])
    with pytest.raises(InvalidConfig):
        sweep(BASE, "V", [0.1], hold_writes=True)


def test_hold_writes_rescales_volatility():
    points = sweep(BASE.with_(runs=1), "S", [20, 80], hold_writes=True)
    assert [p.result.config.V for p in points] == [0.1, 0.025]
    assert [p.value for p in points] == [20, 80]
