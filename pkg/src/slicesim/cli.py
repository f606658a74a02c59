"""Command-line driver.

`slicesim simulate` runs a policy x load x seed sweep from a scenario
config (or the built-in case-study preset) and writes traces plus an
aggregate CSV; `slicesim report` turns an aggregate into plot-ready CSVs
and rendered PNG figures.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import Scenario, load_scenario, paper_case
from .sweep import (FIGURES, MissingCellsError, SweepSpec, emit_figure_data,
                    fine_load_sweep, read_aggregate_csv, run_sweep,
                    write_figure_csv)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slicesim")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a simulation sweep")
    sim.add_argument("--config", help="scenario config YAML")
    sim.add_argument("--preset", choices=["paper-case"],
                     help="use a built-in scenario preset")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--policy", nargs="+", default=["basic", "e2e", "elastic"],
                     choices=["basic", "e2e", "elastic"])
    sim.add_argument("--loads", nargs="+", type=float,
                     help="active-RG fractions (default 0.3 0.5)")
    sim.add_argument("--fine-sweep", action="store_true",
                     help="load sweep 0.10..1.00 step 0.05")
    sim.add_argument("--seeds", nargs="+", type=int,
                     default=list(range(1, 11)))
    sim.add_argument("--duration", type=float, help="override run length [s]")
    sim.add_argument("--no-traces", action="store_true",
                     help="skip per-run trace files")

    rep = sub.add_parser("report", help="emit figure data from an aggregate")
    rep.add_argument("--in", dest="in_dir", required=True,
                     help="directory containing aggregate.csv")
    rep.add_argument("--figure", choices=list(FIGURES), required=True)
    rep.add_argument("--out", help="output directory (default: --in)")
    return p


def _base_scenario(args) -> Scenario:
    if args.config:
        base = load_scenario(args.config)
    elif args.preset == "paper-case":
        base = paper_case()
    else:
        raise SystemExit("simulate needs --config or --preset")
    if args.duration:
        base = replace(base, duration_s=args.duration)
    return base


def cmd_simulate(args) -> int:
    try:
        base = _base_scenario(args)
        loads = tuple(args.loads) if args.loads else \
            (fine_load_sweep() if args.fine_sweep else (0.3, 0.5))
        spec = SweepSpec(base=base, load_points=loads,
                         policies=tuple(args.policy),
                         seeds=tuple(args.seeds),
                         write_traces=not args.no_traces)
    except (ValueError, OSError) as exc:
        print(f"error: invalid sweep configuration: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory not writable: {exc}", file=sys.stderr)
        return 2

    total = len(spec.policies) * len(spec.load_points) * len(spec.seeds)
    done = [0]

    def progress(policy, load, seed):
        done[0] += 1
        print(f"[{done[0]}/{total}] {policy} load={load:.2f} seed={seed}",
              flush=True)

    result = run_sweep(spec, out_dir, progress=progress)
    if result.conservation_failures or result.alloc_violations:
        print("error: invariant violation during sweep "
              f"(conservation={result.conservation_failures}, "
              f"allocation={result.alloc_violations})", file=sys.stderr)
        return 1
    print(f"wrote {len(result.trace_files)} trace files and aggregate.csv "
          f"to {out_dir}")
    return 0


def cmd_report(args) -> int:
    in_dir = Path(args.in_dir)
    agg_path = in_dir / "aggregate.csv"
    if not agg_path.exists():
        print(f"error: {agg_path} not found", file=sys.stderr)
        return 2
    out_dir = Path(args.out) if args.out else in_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    aggregates = read_aggregate_csv(str(agg_path))
    try:
        rows = emit_figure_data(
            {k: {st: dict(v) for st, v in cell.items()}
             for k, cell in aggregates.items()}, args.figure)
    except MissingCellsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    csv_path = out_dir / f"figure_{args.figure}.csv"
    write_figure_csv(rows, str(csv_path))
    from .plotting import render_figure
    png_path = out_dir / f"figure_{args.figure}.png"
    render_figure(rows, args.figure, str(png_path))
    print(f"wrote {csv_path} and {png_path}")
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "simulate":
        return cmd_simulate(args)
    return cmd_report(args)


if __name__ == "__main__":
    sys.exit(main())
