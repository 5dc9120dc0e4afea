#!/usr/bin/env python3
"""
fovsafe Command Line
Run, compare and sweep leader-follower formation scenarios.

Usage:
    python simulate.py run scenarios/two_robot.yaml
    python simulate.py compare scenarios/three_robot.yaml --output outputs/three
    python simulate.py sweep scenarios/two_robot.yaml --param safety.gamma --values 0.2 0.45 1.0
    python simulate.py stats
"""

import os
import sys
import argparse
import logging
from pathlib import Path
from typing import List, Optional

# Add src to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root / "src"))

import pandas as pd
from dotenv import load_dotenv

from exceptions import ConfigError
from scenario import apply_override, load_scenario, read_scenario_dict, read_scenario_file
from harness import run_scenario
from export import compare_summary, export_csv, sweep_row
from monitoring import MetricsCollector, setup_logging

logger = logging.getLogger("fovsafe.cli")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FAULT = 2


def _parse_overrides(items: Optional[List[str]]):
    overrides = []
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"Override '{item}' must look like path.to.key=value")
        key, value = item.split("=", 1)
        overrides.append((key.strip(), value))
    return overrides


def _default_output(scenario_path: str, command: str) -> Path:
    load_dotenv()
    base = Path(os.getenv("OUTPUT_DIR", project_root / "outputs"))
    return base / f"{Path(scenario_path).stem}_{command}"


def _summarize(label: str, metrics) -> str:
    parts = [f"{label}: steps={metrics.steps}"]
    for pm in metrics.pairs:
        parts.append(
            f"pair {pm.pair}: violations={pm.violation_steps} blind={pm.blind_steps} "
            f"infeasible={pm.infeasible_steps} min_h={pm.min_h_overall:.4f}"
        )
    if metrics.degenerate:
        parts.append(f"DEGENERATE: {metrics.fault}")
    return "\n  ".join(parts)


def cmd_run(args) -> int:
    cfg = load_scenario(args.scenario, _parse_overrides(args.set))
    out_dir = Path(args.output) if args.output else _default_output(args.scenario, "run")

    log, metrics = run_scenario(cfg)
    export_csv(log, metrics, out_dir)
    if args.record:
        MetricsCollector(args.db).record_run(metrics, label="run")

    print(_summarize(cfg.name, metrics))
    print(f"Outputs: {out_dir}")
    return EXIT_FAULT if metrics.has_fault else EXIT_OK


def cmd_compare(args) -> int:
    cfg = load_scenario(args.scenario, _parse_overrides(args.set))
    out_dir = Path(args.output) if args.output else _default_output(args.scenario, "compare")

    results = {}
    for label, enabled in (("filter_on", True), ("filter_off", False)):
        log, metrics = run_scenario(cfg.with_filter(enabled))
        export_csv(log, metrics, out_dir / label)
        if args.record:
            MetricsCollector(args.db).record_run(metrics, label=f"compare:{label}")
        results[label] = metrics
        print(_summarize(f"{cfg.name} [{label}]", metrics))

    summary = compare_summary(results["filter_on"], results["filter_off"])
    summary.to_csv(out_dir / "compare_summary.csv", index=False, float_format="%.12g", na_rep="")
    print(summary.to_string(index=False))
    print(f"Outputs: {out_dir}")

    return EXIT_FAULT if any(m.has_fault for m in results.values()) else EXIT_OK


def cmd_sweep(args) -> int:
    raw = read_scenario_file(args.scenario)
    for key, value in _parse_overrides(args.set):
        raw = apply_override(raw, key, value)
    out_dir = Path(args.output) if args.output else _default_output(args.scenario, "sweep")
    collector = MetricsCollector(args.db)

    rows = []
    fault = False
    for value in args.values:
        cfg = read_scenario_dict(apply_override(raw, args.param, value))
        log, metrics = run_scenario(cfg)
        export_csv(log, metrics, out_dir / f"{args.param}={value}")
        collector.record_run(metrics, label=f"sweep:{args.param}={value}")
        rows.append(sweep_row(args.param, value, metrics))
        fault = fault or metrics.has_fault
        logger.info(f"Sweep {args.param}={value}: violations={metrics.total_violations}")

    summary = pd.DataFrame(rows)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary.to_csv(out_dir / "summary.csv", index=False, float_format="%.12g")
    print(summary.to_string(index=False))
    return EXIT_FAULT if fault else EXIT_OK


def cmd_stats(args) -> int:
    stats = MetricsCollector(args.db).get_stats(hours=args.hours)
    for key, value in stats.items():
        print(f"{key}: {value}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulate.py",
        description="Perception-aware leader-follower formation simulator"
    )
    parser.add_argument("--log-dir", default=None, help="Log directory (default LOG_DIR or ./logs)")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ERROR")
    parser.add_argument("--db", default=None, help="Metrics database (default METRICS_DB)")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p):
        p.add_argument("scenario", help="Scenario YAML file")
        p.add_argument("--output", "-o", default=None, help="Output directory")
        p.add_argument("--set", action="append", metavar="PATH=VALUE",
                       help="Override a scenario value, e.g. safety.gamma=0.3")

    p_run = sub.add_parser("run", help="Run one scenario")
    scenario_args(p_run)
    p_run.add_argument("--record", action="store_true", help="Store metrics in the database")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="Run with the safety filter on and off")
    scenario_args(p_cmp)
    p_cmp.add_argument("--record", action="store_true", help="Store metrics in the database")
    p_cmp.set_defaults(func=cmd_compare)

    p_sweep = sub.add_parser("sweep", help="Run one scenario over several values of a parameter")
    scenario_args(p_sweep)
    p_sweep.add_argument("--param", required=True, help="Dotted parameter path")
    p_sweep.add_argument("--values", nargs="+", required=True, help="Values to try")
    p_sweep.set_defaults(func=cmd_sweep)

    p_stats = sub.add_parser("stats", help="Summarize recorded runs")
    p_stats.add_argument("--hours", type=int, default=None, help="Only runs from the last N hours")
    p_stats.set_defaults(func=cmd_stats)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(log_dir=args.log_dir, log_level=args.log_level)

    try:
        return args.func(args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        print(f"❌ Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        logger.error(f"I/O error: {e}")
        print(f"❌ I/O error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
