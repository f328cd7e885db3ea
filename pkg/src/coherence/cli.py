"""Command-line entry point.

Exit codes: 0 success, 1 an acceptance criterion (or checked invariant)
failed, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from coherence import bounds
from coherence.acceptance import evaluate, summary_lines
from coherence.checker import explore
from coherence.errors import BoundsTooLarge, CoherenceError
from coherence.experiments import CheckerSettings, Experiments, checker_table
from coherence.report import (
    FORMATS,
    ReportTable,
    fmt_bound,
    fmt_frac,
    fmt_pct,
    fmt_tokens,
)
from coherence.scenarios import load_scenario
from coherence.sim import SWEEP_PARAMETERS, run_scenario, sweep

OUT_ENV = "COHERENCE_REPORT_DIR"
DEFAULT_OUT = "reports"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _emit(table: ReportTable, fmt: str) -> None:
    sys.stdout.write(table.render(fmt))


def _result_row(r) -> list[str]:
    return [r.config.name, r.config.strategy_label(), fmt_tokens(*r.broadcast_tokens),
            fmt_tokens(*r.coherent_tokens), fmt_pct(*r.savings), fmt_frac(r.crr),
            fmt_pct(*r.chr), fmt_bound(r.bound)]


_RESULT_COLUMNS = ["Scenario", "Strategy", "T_broadcast", "T_coherent", "Savings", "CRR",
                   "CHR", "Lower bound"]


def cmd_run(args) -> int:
    config = load_scenario(args.file)
    if args.runs is not None:
        config = config.with_(runs=args.runs)
    if args.strategy is not None:
        config = config.with_(strategy=args.strategy)
    result = run_scenario(config)
    table = ReportTable("run", f"Scenario {config.name}", _RESULT_COLUMNS)
    table.add_row(_result_row(result))
    table.footnotes.append(f"seed {config.seed}, {config.runs} runs, ± is population sigma")
    _emit(table, args.format)
    return EXIT_OK


def _parse_values(param: str, raw: str) -> list:
    cast = float if param in ("V", "p") else int
    try:
        return [cast(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise CoherenceError(f"--values for {param} must be comma-separated numbers") from None


def cmd_sweep(args) -> int:
    config = load_scenario(args.file)
    values = _parse_values(args.param, args.values)
    points = sweep(config, args.param, values, hold_writes=args.hold_writes)
    table = ReportTable("sweep", f"Sweep of {args.param} from {config.name}",
                        [args.param] + _RESULT_COLUMNS[2:])
    for p in points:
        table.add_row([str(p.value)] + _result_row(p.result)[2:])
    _emit(table, args.format)
    return EXIT_OK


def cmd_bounds(args) -> int:
    table = ReportTable("bounds", f"Bounds for n={args.n}, S={args.s}, m={args.m}, "
                        f"|d|={args.d}",
                        ["V", "W", "T_broadcast", "T_coherent upper", "Savings LB", "V*",
                         "Prompt cache (broadcast)"])
    sizes = [args.d] * args.m
    for v in _parse_values("V", args.v):
        if not 0 <= v <= 1:
            raise CoherenceError(f"V must be in [0, 1], got {v}")
        w = bounds.writes_from_volatility(v, args.s)
        table.add_row([f"V={v:.2f}", f"{w} writes", fmt_tokens(bounds.broadcast_cost(
            args.n, args.s, sizes)), fmt_tokens(bounds.coherent_upper_bound(
                args.n, sizes, [w] * args.m)),
            fmt_bound(bounds.savings_lower_bound_volatility(args.n, args.s, v)),
            fmt_frac(bounds.volatility_cliff(args.n, args.s)),
            fmt_pct(bounds.prompt_cache_hit_estimate(v))])
    _emit(table, args.format)
    return EXIT_OK


def cmd_check(args) -> int:
    mode = "correct"
    if args.broken_upgrade:
        mode = "broken_upgrade_verbatim" if args.verbatim else "broken_upgrade"
    result = explore(args.agents, args.max_stale, args.version_bound, args.step_bound, mode,
                     args.max_states)
    _emit(checker_table([result]), args.format)
    if args.format == "md":
        for v in result.violations:
            print(f"\n{v.invariant} violated, {v.length} transitions:")
            print("\n".join(v.render()))
    return EXIT_OK if result.ok else EXIT_FAIL


def reproduce(out: Path, scenario_dir: Optional[Path] = None,
              checker: Optional[CheckerSettings] = None, echo=print) -> int:
    started = time.monotonic()
    exp = Experiments(scenario_dir, checker or CheckerSettings())
    results = evaluate(exp)
    written = []
    tables = exp.tables()
    for table in tables:
        written += table.write(out)
    summary = ReportTable("acceptance", "Acceptance criteria", ["#", "Criterion", "Result",
                                                                "Detail"])
    for c in results:
        summary.add_row([str(c.number), c.title, "pass" if c.passed else "FAIL", c.detail])
    written += summary.write(out, ("md", "json"))
    for line in summary_lines(results):
        echo(line)
    echo(f"{len(written)} report files in {out} ({time.monotonic() - started:.1f}s)")
    failed = [c.number for c in results if not c.passed]
    if failed:
        echo("failed criteria: " + ", ".join(str(n) for n in failed))
        return EXIT_FAIL
    return EXIT_OK


def cmd_reproduce(args) -> int:
    out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    checker = CheckerSettings(version_bound=args.version_bound, step_bound=args.step_bound,
                              max_states=args.max_states)
    return reproduce(out, args.scenarios, checker)


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(add_help=False)
    top.add_argument("--format", choices=FORMATS, default="md",
                     help="output format (default: md)")
    # SUPPRESS keeps a subcommand from resetting a --format given before it
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=FORMATS, default=argparse.SUPPRESS,
                        help="output format (default: md)")
    parser = argparse.ArgumentParser(
        prog="coherence", parents=[top],
        description="Artifact coherence simulator, bounds calculator and model checker.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run one scenario file")
    p.add_argument("file")
    p.add_argument("--runs", type=int)
    p.add_argument("--strategy")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="sweep one scenario parameter")
    p.add_argument("file")
    p.add_argument("--param", required=True, choices=SWEEP_PARAMETERS)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--hold-writes", action="store_true",
                   help="keep V*S fixed while sweeping (for S sweeps)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bounds", parents=[common], help="closed-form costs and bounds")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--v", default="0.05", help="volatility, or comma-separated list")
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--d", type=int, default=4096, help="artifact size in tokens")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("check", parents=[common], help="explore the protocol state space")
    p.add_argument("--agents", type=int, default=3)
    p.add_argument("--max-stale", type=int, default=3)
    p.add_argument("--version-bound", type=int, default=3)
    p.add_argument("--step-bound", type=int)
    p.add_argument("--max-states", type=int, default=1_000_000)
    p.add_argument("--broken-upgrade", action="store_true")
    p.add_argument("--verbatim", action="store_true",
                   help="with --broken-upgrade: leave Write's peer invalidation in place")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("reproduce", parents=[common], help="run every experiment and "
                       "the acceptance criteria")
    p.add_argument("--out", help=f"report directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    p.add_argument("--scenarios", type=Path, help="directory with scenario_a..d.yaml and "
                   "pointer.yaml (default: the packaged files)")
    p.add_argument("--version-bound", type=int, default=3)
    p.add_argument("--step-bound", type=int)
    p.add_argument("--max-states", type=int, default=1_000_000)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BoundsTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (CoherenceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
