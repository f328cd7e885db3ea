"""The reproduction experiment set and its report tables.

Each experiment is computed on first use and cached, so the acceptance gate
and the report writer share one set of simulation results.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Union

from coherence import bounds
from coherence.checker import CheckResult, explore
from coherence.errors import BoundsTooLarge
from coherence.report import (
    ReportTable,
    fmt_bound,
    fmt_count,
    fmt_frac,
    fmt_pct,
    fmt_tokens,
)
from coherence.scenarios import CANONICAL, POINTER, load_directory
from coherence.sim import ScenarioConfig, ScenarioResult, run_scenario, sweep

VOLATILITIES = (0.01, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 1.00)
AGENT_COUNTS = (2, 4, 8, 16)
SIZES = (4096, 8192, 32768, 65536)
STEP_COUNTS = (5, 10, 20, 40, 50, 100)
STRATEGIES = ("eager", "lazy", "access_count", "ttl", "broadcast")
POINTER_STRATEGIES = ("eager", "lazy", "access_count")


@dataclass
class CheckerSettings:
    agents: int = 3
    K: int = 3
    version_bound: int = 3
    step_bound: Optional[int] = None
    max_states: int = 1_000_000


@dataclass
class Experiments:
    scenario_dir: Optional[Union[str, Path]] = None
    checker: CheckerSettings = field(default_factory=CheckerSettings)

    @cached_property
    def configs(self) -> dict:
        return load_directory(self.scenario_dir)

    @cached_property
    def canonical(self) -> dict:
        return {name: run_scenario(self.configs[name]) for name in CANONICAL}

    @property
    def scenario_a(self) -> ScenarioConfig:
        return self.configs["scenario_a"]

    @property
    def scenario_b(self) -> ScenarioConfig:
        return self.configs["scenario_b"]

    @cached_property
    def strategies(self) -> dict:
        base = self.scenario_b
        return {s: run_scenario(base.with_(name=f"{base.name}/{s}", strategy=s))
                for s in STRATEGIES}

    @cached_property
    def volatility_sweep(self):
        return sweep(self.scenario_a, "V", VOLATILITIES)

    @cached_property
    def agent_sweep(self):
        return sweep(self.scenario_b, "n", AGENT_COUNTS)

    @cached_property
    def size_sweep(self):
        return sweep(self.scenario_a, "artifact_tokens", SIZES)

    @cached_property
    def step_sweep(self):
        return sweep(self.scenario_a, "S", STEP_COUNTS, hold_writes=True)

    @cached_property
    def pointer(self) -> dict:
        base = self.configs[POINTER]
        return {s: run_scenario(base.with_(name=f"{base.name}/{s}", strategy=s))
                for s in POINTER_STRATEGIES}

    @cached_property
    def baseline_p0(self) -> ScenarioResult:
        a = self.scenario_a
        return run_scenario(a.with_(name=f"{a.name}/p=0", p=0.0, strategy="broadcast"))

    @cached_property
    def duplicated(self) -> ScenarioResult:
        b = self.scenario_b
        return run_scenario(b.with_(name=f"{b.name}/dup", duplicate_probability=1.0))

    @cached_property
    def check_correct(self) -> CheckResult:
        c = self.checker
        return explore(c.agents, c.K, c.version_bound, c.step_bound, "correct", c.max_states)

    @cached_property
    def check_broken(self) -> CheckResult:
        c = self.checker
        return explore(c.agents, c.K, c.version_bound, c.step_bound, "broken_upgrade",
                       c.max_states)

    @cached_property
    def check_broken_verbatim(self) -> CheckResult:
        c = self.checker
        return explore(c.agents, c.K, c.version_bound, c.step_bound,
                       "broken_upgrade_verbatim", c.max_states)

    def coherent_results(self, include_pointer: bool = True) -> list[ScenarioResult]:
        """Every non-broadcast scenario result of the experiment set."""
        results = list(self.canonical.values())
        results += [r for s, r in self.strategies.items() if s != "broadcast"]
        for points in (self.volatility_sweep, self.agent_sweep, self.size_sweep,
                       self.step_sweep):
            results += [p.result for p in points]
        if include_pointer:
            results += list(self.pointer.values())
        results.append(self.duplicated)
        return results

    # -- tables -------------------------------------------------------------

    def _checker_report(self) -> ReportTable:
        try:
            return checker_table([self.check_correct, self.check_broken,
                                  self.check_broken_verbatim])
        except BoundsTooLarge as exc:
            table = ReportTable("checker", "Explicit-state exploration (3 agents, 1 artifact)",
                                ["Mode", "Result"])
            table.add_row(["all", f"aborted: {exc}"])
            return table

    def tables(self) -> list[ReportTable]:
        return [
            scenario_table(self.canonical),
            strategy_table(self.strategies),
            sweep_table("sweep_volatility", "Savings vs volatility (lazy, n=4, S=40)",
                        "V", self.volatility_sweep, lambda v: f"V={v:.2f}"),
            sweep_table("sweep_agents", "Savings vs agent count (lazy, V=0.10, S=40)",
                        "n", self.agent_sweep, lambda v: f"{v} agents"),
            sweep_table("sweep_size", "Savings vs artifact size (lazy, V=0.05, S=40)",
                        "|d|", self.size_sweep, lambda v: f"{v:,} tok"),
            sweep_table("sweep_steps", "Savings vs step count at fixed W=2 (lazy, n=4)",
                        "S", self.step_sweep, lambda v: f"{v} steps"),
            pointer_table(self.pointer),
            baseline_table(self.canonical, self.baseline_p0),
            idempotence_table(self.strategies["lazy"], self.duplicated),
            self._checker_report(),
            bounds_table(),
        ]


def scenario_table(results: dict) -> ReportTable:
    table = ReportTable("scenarios", "Canonical scenarios (lazy, 10 runs each)",
                        ["Scenario", "V", "T_broadcast", "T_coherent", "Savings", "CRR",
                         "CHR", "Lower bound"])
    for name, r in results.items():
        c = r.config
        table.add_row([name, f"V={c.V:.2f}", fmt_tokens(*r.broadcast_tokens),
                       fmt_tokens(*r.coherent_tokens), fmt_pct(*r.savings),
                       fmt_frac(r.crr), fmt_pct(*r.chr), fmt_bound(r.bound)])
    seeds = ", ".join(str(r.config.seed) for r in results.values())
    table.footnotes += [
        f"Scenario seeds {seeds}; run i uses seed + i. ± is population sigma over runs.",
        "Savings are per-run 1 - T_coherent/T_broadcast against the paired broadcast run.",
    ]
    return table


def strategy_table(results: dict) -> ReportTable:
    table = ReportTable("strategies", "Strategy comparison at V=0.10",
                        ["Strategy", "T_sync", "Savings", "CHR", "Signals", "Stale reads"])
    for name, r in results.items():
        signals = sum(x.invalidations_sent + x.version_updates_sent for x in r.runs)
        stale = sum(x.stale_reads for x in r.runs)
        table.add_row([r.config.strategy_label(), fmt_tokens(*r.coherent_tokens),
                       fmt_pct(*r.savings), fmt_pct(*r.chr),
                       fmt_count(signals, "signals"), fmt_count(stale, "reads")])
    table.footnotes.append(
        "Eager keeps no staleness budget; its stale reads are expected, not errors.")
    return table


def sweep_table(name: str, title: str, label: str, points, show) -> ReportTable:
    table = ReportTable(name, title, [label, "T_broadcast", "T_coherent", "Savings",
                                      "Lower bound"])
    for p in points:
        r = p.result
        table.add_row([show(p.value), fmt_tokens(r.broadcast_tokens[0]),
                       fmt_tokens(*r.coherent_tokens), fmt_pct(*r.savings),
                       fmt_bound(r.bound)])
    table.footnotes.append("Lower bound is 1 - n/S - V; negative bounds are shown as 0.0%.")
    return table


def pointer_table(results: dict) -> ReportTable:
    table = ReportTable("pointer", "Pointer access model (shipped non-published scenario)",
                        ["Strategy", "T_sync", "CHR", "Fetches"])
    for name, r in results.items():
        fetches = sum(x.fetch_count for x in r.runs) // len(r.runs)
        table.add_row([r.config.strategy_label(), fmt_tokens(*r.coherent_tokens),
                       fmt_pct(*r.chr), fmt_count(fetches, "fetches/run")])
    cfg = next(iter(results.values())).config
    table.footnotes.append(
        f"n={cfg.n}, m={cfg.m}, S={cfg.S}, V={cfg.V}, K={cfg.K}, seed {cfg.seed}.")
    return table


def baseline_table(canonical: dict, p0: ScenarioResult) -> ReportTable:
    table = ReportTable("broadcast_baseline", "Broadcast baseline vs closed form",
                        ["Run set", "Closed form", "Simulated", "Overshoot"])
    formula = p0.config.broadcast_cost()
    table.add_row([p0.config.name, fmt_tokens(formula), fmt_tokens(*p0.broadcast_tokens),
                   fmt_pct(p0.broadcast_tokens[0] / formula - 1)])
    for name, r in canonical.items():
        formula = r.config.broadcast_cost()
        table.add_row([name, fmt_tokens(formula), fmt_tokens(*r.broadcast_tokens),
                       fmt_pct(r.broadcast_tokens[0] / formula - 1)])
    return table


def idempotence_table(single: ScenarioResult, duplicated: ScenarioResult) -> ReportTable:
    table = ReportTable("idempotence", "Duplicate delivery (p=1.0) vs single delivery",
                        ["Run", "Single", "Duplicated", "Same final caches"])
    for a, b in zip(single.runs, duplicated.runs):
        same = "yes" if a.final_states == b.final_states else "no"
        table.add_row([f"run {a.run_index}", fmt_tokens(a.sync_tokens),
                       fmt_tokens(b.sync_tokens), same])
    return table


def checker_table(results: list) -> ReportTable:
    table = ReportTable("checker", "Explicit-state exploration (3 agents, 1 artifact)",
                        ["Mode", "Bounds", "States", "Deadlocks", "Violations", "Shortest trace"])
    for r in results:
        found = ", ".join(v.invariant for v in r.violations) or "none"
        trace = "; ".join(" -> ".join(a for a, _ in v.trace[1:]) for v in r.violations) or "-"
        table.add_row([r.mode, f"K={r.K}, v<={r.version_bound}, steps<={r.step_bound}",
                       fmt_count(r.state_count, "states"),
                       fmt_count(len(r.deadlocks), "deadlocks"), found, trace])
    return table


BOUND_SHAPES = ((4, 40, 3, 4096, 0), (4, 40, 3, 4096, 2), (5, 50, 3, 4096, 2),
                (4, 40, 3, 4096, 4), (5, 20, 3, 4096, 2), (4, 5, 3, 4096, 2),
                (16, 40, 3, 4096, 4))


def bounds_table(shapes=BOUND_SHAPES) -> ReportTable:
    table = ReportTable("bounds", "Closed-form costs and bounds",
                        ["Shape", "T_broadcast", "T_coherent upper", "Savings LB", "V*",
                         "Prompt cache (broadcast)"])
    for n, S, m, d, w in shapes:
        sizes, writes = [d] * m, [w] * m
        V = bounds.volatility(w, S)
        table.add_row([f"n={n} S={S} m={m} |d|={d} W={w}",
                       fmt_tokens(bounds.broadcast_cost(n, S, sizes)),
                       fmt_tokens(bounds.coherent_upper_bound(n, sizes, writes)),
                       fmt_bound(bounds.savings_lower_bound(n, S, w)),
                       fmt_frac(bounds.volatility_cliff(n, S)),
                       fmt_pct(bounds.prompt_cache_hit_estimate(min(V, 1.0)))])
    table.footnotes.append(
        "The upper bound charges n(n + W) fetches per artifact; the tighter n(1 + W) "
        "count is available as coherent_upper_bound_tight.")
    return table
