"""Command line front end: single runs, parameter sweeps, ablation switches.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from .engine import ConfigError
from .metrics import CSV_COLUMNS, MetricsTable, emit_csv, fmt, rows_to_csv_text
from .network import run_network
from .scenario import (Scenario, ScenarioError, default_scenario,
                       parse_scenario, scenario_text)

SWEEP_AXES = ("nodes", "offered_load")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="wsnsim",
        description="Deterministic mobile-WSN simulator: adaptive beaconing, "
                    "energy-aware clustering, on-demand routing.")
    p.add_argument("--scenario", metavar="FILE", help="scenario file (key = value lines)")
    p.add_argument("--seed", type=int, metavar="N", help="single-run seed")
    p.add_argument("--seeds", metavar="N..M", help="inclusive seed range for sweeps")
    p.add_argument("--sweep", metavar="AXIS=v1,v2,...",
                   help="sweep axis: nodes or offered_load (kbps)")
    p.add_argument("--mode", choices=("hybrid", "aodv_only", "cluster_only"))
    p.add_argument("--beaconing", choices=("adaptive", "periodic"))
    p.add_argument("--trace", metavar="FILE", help="write a line-per-event log")
    p.add_argument("--out", metavar="FILE", help="CSV output path (default stdout)")
    p.add_argument("--jobs", type=int, default=1, metavar="N",
                   help="parallel sweep workers (results merge in order)")
    p.add_argument("--print-defaults", action="store_true",
                   help="print the default scenario and exit")
    return p


def _load_scenario(args) -> Scenario:
    if args.scenario:
        with open(args.scenario, encoding="utf-8") as fh:
            text = fh.read()
        label = args.scenario.rsplit("/", 1)[-1].rsplit(".", 1)[0]
        sc = parse_scenario(text, label=label)
    else:
        sc = default_scenario()
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    if args.mode:
        sc = replace(sc, mode=args.mode)
    if args.beaconing:
        sc = replace(sc, beaconing_mode=args.beaconing)
    return sc


def _parse_seeds(spec: str) -> list:
    lo, sep, hi = spec.partition("..")
    if not sep:
        return [int(spec)]
    lo_i, hi_i = int(lo), int(hi)
    if hi_i < lo_i:
        raise ScenarioError(f"empty seed range {spec!r}")
    return list(range(lo_i, hi_i + 1))


def _parse_sweep(spec: str) -> tuple:
    axis, sep, values = spec.partition("=")
    axis = axis.strip()
    if not sep or axis not in SWEEP_AXES:
        raise ScenarioError(
            f"sweep must be AXIS=v1,v2,... with AXIS in {SWEEP_AXES}")
    out = []
    for tok in values.split(","):
        tok = tok.strip()
        if not tok:
            continue
        out.append(int(tok) if axis == "nodes" else float(tok))
    if not out:
        raise ScenarioError("sweep needs at least one value")
    return axis, out


def sweep_scenarios(base: Scenario, axis: str, values, seeds) -> list:
    """One scenario per (value, seed), rows in deterministic order."""
    out = []
    for value in values:
        for seed in seeds:
            label = f"{base.label}:{axis}={fmt(value)}"
            if axis == "nodes":
                sc = replace(base, nodes=int(value), seed=seed, label=label)
            else:
                sc = replace(base, traffic_load_kbps=float(value), seed=seed,
                             label=label)
            out.append(sc)
    return out


def _run_one(sc: Scenario) -> MetricsTable:
    return run_network(sc).table


def run_sweep(scenarios, jobs: int = 1) -> list:
    if jobs <= 1 or len(scenarios) <= 1:
        return [_run_one(sc) for sc in scenarios]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, scenarios))


def _summary_text(axis: str, values, rows, seeds) -> str:
    """Per-axis means over seeds for the headline metrics."""
    lines = [f"{axis},runs,delivered,mean_delay_s,throughput_kbps,"
             "total_energy_j,mean_energy_j"]
    per_value = len(seeds)
    for i, value in enumerate(values):
        chunk = rows[i * per_value:(i + 1) * per_value]
        delays = [r.mean_delay_s for r in chunk if r.mean_delay_s is not None]
        mean_delay = sum(delays) / len(delays) if delays else None
        lines.append(",".join([
            fmt(value), str(len(chunk)),
            fmt(sum(r.delivered for r in chunk) / len(chunk)),
            fmt(mean_delay),
            fmt(sum(r.throughput_kbps for r in chunk) / len(chunk)),
            fmt(sum(r.total_energy_j for r in chunk) / len(chunk)),
            fmt(sum(r.mean_energy_j for r in chunk) / len(chunk)),
        ]))
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        if args.print_defaults:
            sys.stdout.write(scenario_text(default_scenario()))
            return 0
        base = _load_scenario(args)
        if args.sweep:
            axis, values = _parse_sweep(args.sweep)
            if args.seeds:
                seeds = _parse_seeds(args.seeds)
            else:
                seeds = list(range(base.seed, base.seed + base.replications))
            scenarios = sweep_scenarios(base, axis, values, seeds)
            rows = run_sweep(scenarios, jobs=args.jobs)
            text = rows_to_csv_text(rows)
            if args.out:
                with open(args.out, "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
                summary = _summary_text(axis, values, rows, seeds)
                with open(args.out + ".summary.csv", "w", encoding="utf-8",
                          newline="") as fh:
                    fh.write(summary)
            else:
                sys.stdout.write(text)
            return 0
        trace_lines = [] if args.trace else None
        net_trace = trace_lines.append if trace_lines is not None else None
        from .network import Network
        net = Network(base, trace=net_trace)
        net.run()
        if args.trace:
            with open(args.trace, "w", encoding="utf-8", newline="") as fh:
                fh.write("\n".join(trace_lines) + "\n")
        text = rows_to_csv_text([net.table])
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0
    except (ConfigError, ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
