"""Seeded tick-based simulation of agents sharing artifacts.

Every run draws exactly three uniforms per agent per tick (act, write, target),
whether or not the agent acts. The coherent run and its paired broadcast run
therefore see identical action sequences, and sweeping V or p changes which
actions fire without shifting the random stream.

Within a tick, agents act in ascending id order; a write is one atomic
fetch-if-needed, upgrade, write, commit action. Bus messages are delivered
after the last agent has acted.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from coherence.authority import Authority
from coherence.bounds import (
    broadcast_cost,
    coherent_upper_bound,
    savings_lower_bound_volatility,
)
from coherence.bus import EventBus
from coherence.errors import InvalidConfig, NotShared
from coherence.rng import SplitMix64, derive_seed
from coherence.runtime import AgentRuntime
from coherence.strategies import STRATEGY_NAMES, make_strategy

ACCESS_MODELS = ("embed", "pointer")
SWEEP_PARAMETERS = ("V", "n", "S", "artifact_tokens", "p", "m")
BUS_STREAM = 1


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    n: int = 4
    m: int = 3
    artifact_tokens: int = 4096
    S: int = 40
    V: float = 0.05
    p: float = 0.75
    strategy: str = "lazy"
    K: int = 20
    ttl_steps: int = 10
    k: int = 8
    invalidation_overhead_tokens: int = 12
    charge_version_updates: bool = True
    lease_ttl_ticks: int = 30
    runs: int = 10
    seed: int = 0
    access_model: str = "embed"
    duplicate_probability: float = 0.0
    reorder: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise InvalidConfig(f"{self.name}: {msg}")

        for name in ("n", "m", "artifact_tokens", "runs", "lease_ttl_ticks"):
            value = getattr(self, name)
            need(isinstance(value, int) and not isinstance(value, bool) and value >= 1,
                 f"{name} must be an integer >= 1, got {value!r}")
        for name in ("S", "K", "seed", "invalidation_overhead_tokens"):
            value = getattr(self, name)
            need(isinstance(value, int) and not isinstance(value, bool) and value >= 0,
                 f"{name} must be an integer >= 0, got {value!r}")
        need(0.0 <= self.V <= 1.0, f"V must be in [0, 1], got {self.V!r}")
        # p = 0 is allowed: it isolates the deterministic broadcast sweep
        need(0.0 <= self.p <= 1.0, f"p must be in [0, 1], got {self.p!r}")
        need(0.0 <= self.duplicate_probability <= 1.0, "duplicate_probability must be in [0, 1]")
        need(self.strategy in STRATEGY_NAMES,
             f"unknown strategy {self.strategy!r}; expected one of {', '.join(STRATEGY_NAMES)}")
        need(self.access_model in ACCESS_MODELS,
             f"access_model must be one of {', '.join(ACCESS_MODELS)}")
        need(self.ttl_steps >= 1 and self.k >= 1, "ttl_steps and k must be >= 1")

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    @property
    def agents(self) -> list[str]:
        width = len(str(self.n))
        return [f"a{i:0{width}d}" for i in range(1, self.n + 1)]

    @property
    def artifacts(self) -> list[str]:
        width = len(str(self.m))
        return [f"d{i:0{width}d}" for i in range(1, self.m + 1)]

    @property
    def sizes(self) -> list[int]:
        return [self.artifact_tokens] * self.m

    def broadcast_cost(self) -> int:
        return broadcast_cost(self.n, self.S, self.sizes)

    def bound(self) -> Optional[float]:
        """Savings lower bound 1 - n/S - V (W = V * S unrounded); None when S == 0."""
        if self.S < 1:
            return None
        return savings_lower_bound_volatility(self.n, self.S, self.V)

    def strategy_label(self) -> str:
        return make_strategy(self.strategy, self.ttl_steps, self.k).label()


@dataclass(frozen=True)
class RunMetrics:
    run_index: int
    seed: int
    strategy: str
    sync_tokens: int
    fetch_tokens: int
    signal_tokens: int
    fetch_count: int
    cache_hits: int
    cache_misses: int
    invalidations_sent: int
    version_updates_sent: int
    writes_committed: int
    writes_per_artifact: tuple
    stale_reads: int = 0
    final_states: dict = field(default_factory=dict, compare=True)

    @property
    def chr(self) -> float:
        accesses = self.cache_hits + self.cache_misses
        return self.cache_hits / accesses if accesses else 0.0

    def upper_bound(self, config: ScenarioConfig) -> int:
        return coherent_upper_bound(config.n, config.sizes, list(self.writes_per_artifact))

    def as_dict(self) -> dict:
        return {
            "run_index": self.run_index,
            "seed": self.seed,
            "strategy": self.strategy,
            "sync_tokens": self.sync_tokens,
            "fetch_tokens": self.fetch_tokens,
            "signal_tokens": self.signal_tokens,
            "fetch_count": self.fetch_count,
            "cache_hits": self.cache_hits,
            "cache_misses": self.cache_misses,
            "chr": self.chr,
            "invalidations_sent": self.invalidations_sent,
            "version_updates_sent": self.version_updates_sent,
            "writes_committed": self.writes_committed,
            "writes_per_artifact": list(self.writes_per_artifact),
            "stale_reads": self.stale_reads,
        }


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    # population sigma: a single run reports 0
    return statistics.fmean(values), statistics.pstdev(values)


@dataclass(frozen=True)
class ScenarioResult:
    config: ScenarioConfig
    runs: tuple
    baseline: tuple

    @property
    def coherent_tokens(self) -> tuple[float, float]:
        return _mean_sd([r.sync_tokens for r in self.runs])

    @property
    def broadcast_tokens(self) -> tuple[float, float]:
        return _mean_sd([r.sync_tokens for r in self.baseline])

    @property
    def per_run_savings(self) -> list[float]:
        return [1 - c.sync_tokens / b.sync_tokens if b.sync_tokens else 0.0
                for c, b in zip(self.runs, self.baseline)]

    @property
    def savings(self) -> tuple[float, float]:
        return _mean_sd(self.per_run_savings)

    @property
    def crr(self) -> float:
        broadcast = self.broadcast_tokens[0]
        return self.coherent_tokens[0] / broadcast if broadcast else 0.0

    @property
    def chr(self) -> tuple[float, float]:
        return _mean_sd([r.chr for r in self.runs])

    @property
    def bound(self) -> Optional[float]:
        return self.config.bound()

    def bound_violations(self) -> list[int]:
        """Run indices whose coherent cost exceeds the upper bound at realized W."""
        return [r.run_index for r in self.runs
                if r.sync_tokens > r.upper_bound(self.config)]

    def summary(self) -> dict:
        bt, bt_sd = self.broadcast_tokens
        ct, ct_sd = self.coherent_tokens
        sv, sv_sd = self.savings
        ch, ch_sd = self.chr
        return {
            "scenario": self.config.name,
            "strategy": self.config.strategy_label(),
            "n": self.config.n,
            "m": self.config.m,
            "S": self.config.S,
            "V": self.config.V,
            "artifact_tokens": self.config.artifact_tokens,
            "seed": self.config.seed,
            "runs": self.config.runs,
            "broadcast_tokens": bt,
            "broadcast_tokens_sd": bt_sd,
            "coherent_tokens": ct,
            "coherent_tokens_sd": ct_sd,
            "savings": sv,
            "savings_sd": sv_sd,
            "crr": self.crr,
            "chr": ch,
            "chr_sd": ch_sd,
            "bound": self.bound,
        }


# -- single runs -------------------------------------------------------------

def _draws(rng: SplitMix64, config: ScenarioConfig):
    """Yield (tick, agent_index, action) where action is None, ('r', j) or ('w', j)."""
    for tick in range(config.S):
        for i in range(config.n):
            act, write, target = rng.random(), rng.random(), rng.random()
            if act < config.p:
                kind = "w" if write < config.V else "r"
                yield tick, i, (kind, int(target * config.m))
            else:
                yield tick, i, None


def simulate_coherent(config: ScenarioConfig, run_index: int = 0) -> RunMetrics:
    seed = config.seed + run_index
    rng = SplitMix64(seed)
    agents, artifacts = config.agents, config.artifacts
    strategy = make_strategy(config.strategy, config.ttl_steps, config.k)
    bus = EventBus(config.duplicate_probability, config.reorder,
                   seed=derive_seed(seed, BUS_STREAM))
    authority = Authority(agents, strategy, bus,
                          lease_ttl_ticks=config.lease_ttl_ticks,
                          signal_tokens=config.invalidation_overhead_tokens,
                          charge_version_updates=config.charge_version_updates)
    for artifact_id in artifacts:
        authority.register(artifact_id, config.artifact_tokens)
    runtimes = []
    for agent in agents:
        bus.subscribe(agent, artifacts)
        runtimes.append(AgentRuntime(agent, authority, strategy, max_stale_steps=config.K))

    writes = [0] * config.m
    current_tick = -1
    for tick, i, action in _draws(rng, config):
        if tick != current_tick:
            if current_tick >= 0:
                _deliver(bus, runtimes)
            current_tick = tick
            authority.tick_leases(tick)
        runtime = runtimes[i]
        runtime.begin_step(tick)
        if action is None:
            continue
        kind, j = action
        artifact_id = artifacts[j]
        if kind == "r":
            runtime.read(artifact_id)
            continue
        try:
            runtime.write(artifact_id, retry_on_conflict=False)
        except NotShared:
            # a peer committed earlier this tick: the refresh fetch stands in as a read
            runtime.entries[artifact_id].reads_since_fetch += 1
            continue
        runtime.commit(artifact_id)
        writes[j] += 1
    if current_tick >= 0:
        _deliver(bus, runtimes)

    ledger = authority.ledger
    return RunMetrics(
        run_index=run_index,
        seed=seed,
        strategy=strategy.label(),
        sync_tokens=ledger.total,
        fetch_tokens=ledger.fetch_tokens,
        signal_tokens=ledger.signal_tokens,
        fetch_count=ledger.fetches,
        cache_hits=sum(r.hits for r in runtimes),
        cache_misses=sum(r.misses for r in runtimes),
        invalidations_sent=ledger.invalidations,
        version_updates_sent=ledger.version_updates,
        writes_committed=sum(writes),
        writes_per_artifact=tuple(writes),
        stale_reads=sum(r.stale_reads for r in runtimes),
        final_states={r.agent_id: r.snapshot() for r in runtimes},
    )


def _deliver(bus: EventBus, runtimes: list[AgentRuntime]) -> None:
    for runtime in runtimes:
        for envelope in bus.deliver(runtime.agent_id):
            runtime.handle(envelope)


def simulate_broadcast(config: ScenarioConfig, run_index: int = 0) -> RunMetrics:
    """Full rebroadcast baseline driven by the same action stream.

    Caches start cold. At the end of every tick the full state is pushed to
    every agent (n * sum|d| tokens), which leaves every copy current. An
    action that finds its copy missing (only possible before the first sweep)
    fetches it on top of the sweep.
    """
    seed = config.seed + run_index
    rng = SplitMix64(seed)
    n, m, size = config.n, config.m, config.artifact_tokens
    valid = [[False] * m for _ in range(n)]
    sweep_tokens = n * m * size
    fetch_tokens = fetches = hits = sweeps = 0
    writes = [0] * m
    current_tick = -1
    for tick, i, action in _draws(rng, config):
        if tick != current_tick:
            if current_tick >= 0:
                sweeps += 1
                valid = [[True] * m for _ in range(n)]
            current_tick = tick
        if action is None:
            continue
        kind, j = action
        if valid[i][j]:
            hits += 1
        else:
            valid[i][j] = True
            fetches += 1
            fetch_tokens += size
        if kind == "w":
            writes[j] += 1
    if current_tick >= 0:
        sweeps += 1

    sweep_total = sweeps * sweep_tokens
    return RunMetrics(
        run_index=run_index,
        seed=seed,
        strategy="broadcast",
        sync_tokens=sweep_total + fetch_tokens,
        fetch_tokens=sweep_total + fetch_tokens,
        signal_tokens=0,
        fetch_count=fetches + sweeps * n * m,
        cache_hits=hits,
        cache_misses=fetches,
        invalidations_sent=0,
        version_updates_sent=0,
        writes_committed=sum(writes),
        writes_per_artifact=tuple(writes),
    )


def simulate(config: ScenarioConfig, run_index: int = 0) -> RunMetrics:
    if config.strategy == "broadcast":
        return simulate_broadcast(config, run_index)
    return simulate_coherent(config, run_index)


# -- aggregates --------------------------------------------------------------

def run_broadcast_baseline(config: ScenarioConfig) -> list[RunMetrics]:
    return [simulate_broadcast(config, r) for r in range(config.runs)]


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    """All runs of ``config`` plus the paired broadcast baseline."""
    config.validate()
    baseline = tuple(run_broadcast_baseline(config))
    if config.strategy == "broadcast":
        runs = baseline
    else:
        runs = tuple(simulate_coherent(config, r) for r in range(config.runs))
    return ScenarioResult(config, runs, baseline)


@dataclass(frozen=True)
class SweepPoint:
    value: object
    result: ScenarioResult


def sweep(config: ScenarioConfig, parameter: str, values: Sequence,
          hold_writes: bool = False) -> list[SweepPoint]:
    """One :func:`run_scenario` per value, same seed throughout.

    With ``hold_writes`` the expected write count V*S of the base config is
    kept fixed, so sweeping S rescales V (and sweeping V is rejected).
    """
    if parameter not in SWEEP_PARAMETERS:
        raise InvalidConfig(f"cannot sweep {parameter!r}; expected one of "
                            f"{', '.join(SWEEP_PARAMETERS)}")
    if hold_writes and parameter == "V":
        raise InvalidConfig("hold_writes fixes V*S and cannot be combined with a V sweep")
    points = []
    for value in values:
        changes = {parameter: value}
        if hold_writes:
            steps = value if parameter == "S" else config.S
            if steps < 1:
                raise InvalidConfig("hold_writes needs S >= 1")
            changes["V"] = min(1.0, config.V * config.S / steps)
        cfg = config.with_(name=f"{config.name}[{parameter}={value}]", **changes)
        points.append(SweepPoint(value, run_scenario(cfg)))
    return points
