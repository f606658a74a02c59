"""Batch experiment driver: policy x load x seed sweeps with cross-seed
aggregation and long-format figure data for the three evaluation plots."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .config import Scenario
from .engine import run as run_engine, write_trace
from .metrics import RunMetrics, aggregate, summarize_run
from .scheduler import PolicyConfig

POLICIES = ("basic", "e2e", "elastic")

AGGREGATE_COLUMNS = ["policy", "active_fraction", "slice_type",
                     "mean_latency_ms", "pr_A_gt_099", "qos_met",
                     "seeds", "ci95"]


@dataclass(frozen=True)
class SweepSpec:
    base: Scenario
    load_points: tuple[float, ...] = (0.3, 0.5)
    policies: tuple[str, ...] = POLICIES
    seeds: tuple[int, ...] = tuple(range(1, 11))
    write_traces: bool = True

    def __post_init__(self):
        if not self.load_points or not self.policies or not self.seeds:
            raise ValueError("load_points, policies and seeds must be non-empty")
        for f in self.load_points:
            if not 0.0 < f <= 1.0:
                raise ValueError(f"active fraction {f} outside (0, 1]")
        for p in self.policies:
            if p not in POLICIES:
                raise ValueError(f"unknown policy {p!r}")


def fine_load_sweep(start: float = 0.10, stop: float = 1.0,
                    step: float = 0.05) -> tuple[float, ...]:
    pts = []
    k = 0
    while True:
        f = round(start + k * step, 10)
        if f > stop + 1e-9:
            break
        pts.append(round(f, 4))
        k += 1
    return tuple(pts)


@dataclass
class SweepResult:
    spec: SweepSpec
    # (policy, load) -> list over seeds of per-slice-type RunMetrics
    cells: dict = field(default_factory=dict)
    # (policy, load) -> aggregated dict per slice type
    aggregates: dict = field(default_factory=dict)
    # exact-invariant counters accumulated over every run
    late_elastic_deliveries: int = 0
    alloc_violations: int = 0
    conservation_failures: int = 0
    trace_files: list = field(default_factory=list)


def run_one(base: Scenario, policy: str, load: float, seed: int) -> tuple:
    scenario = replace(base, policy=replace(base.policy, name=policy),
                       active_fraction=load, seed=seed)
    result = run_engine(scenario)
    return scenario, result


def run_sweep(spec: SweepSpec, out_dir: str | os.PathLike | None = None,
              progress=None) -> SweepResult:
    """Run every (policy, load, seed) cell and aggregate across seeds.

    With `out_dir` set, per-run trace CSVs (unless disabled) and the
    aggregate CSV are written there.
    """
    out = SweepResult(spec=spec)
    outp = Path(out_dir) if out_dir is not None else None
    if outp is not None:
        outp.mkdir(parents=True, exist_ok=True)
    warm = spec.base.warmup_us
    for policy in spec.policies:
        for load in spec.load_points:
            per_seed = []
            for seed in spec.seeds:
                scenario, result = run_one(spec.base, policy, load, seed)
                if not result.conservation_ok():
                    out.conservation_failures += 1
                out.alloc_violations += result.alloc_violations
                if policy == "elastic":
                    out.late_elastic_deliveries += sum(
                        1 for r in result.records
                        if r.outcome == "delivered" and r.created_us >= warm
                        and r.delivered_us > r.deadline_us)
                per_seed.append(summarize_run(result))
                if outp is not None and spec.write_traces:
                    fname = f"trace_{policy}_f{load:.2f}_s{seed}.csv"
                    write_trace(result, str(outp / fname))
                    out.trace_files.append(fname)
                if progress:
                    progress(policy, load, seed)
            out.cells[(policy, load)] = per_seed
            out.aggregates[(policy, load)] = aggregate(per_seed)
    if outp is not None:
        write_aggregate_csv(out, str(outp / "aggregate.csv"))
    return out


def write_aggregate_csv(result: SweepResult, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(AGGREGATE_COLUMNS)
        for (policy, load) in sorted(result.aggregates):
            agg = result.aggregates[(policy, load)]
            for st in ("embb", "regular", "emergency"):
                a = agg[st]
                w.writerow([policy, f"{load:.4f}", st,
                            _fmt(a["mean_latency_ms"]),
                            _fmt(a["pr_A_gt_target"]),
                            _fmt(a["qos_met"]),
                            a["seeds"], _fmt(a["qos_ci95"])])


def _fmt(x) -> str:
    if x != x:  # NaN
        return ""
    return f"{x:.6f}"


def read_aggregate_csv(path: str) -> dict:
    """aggregate.csv -> {(policy, load): {slice_type: row dict}}"""
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["policy"], float(row["active_fraction"]))
            cell = out.setdefault(key, {})
            cell[row["slice_type"]] = {
                "mean_latency_ms": float(row["mean_latency_ms"]) if row["mean_latency_ms"] else float("nan"),
                "pr_A_gt_099": float(row["pr_A_gt_099"]) if row["pr_A_gt_099"] else float("nan"),
                "qos_met": float(row["qos_met"]) if row["qos_met"] else float("nan"),
                "seeds": int(row["seeds"]),
                "ci95": float(row["ci95"]) if row["ci95"] else float("nan"),
            }
    return out


FIGURES = ("latency", "availability", "qos")


class MissingCellsError(ValueError):
    def __init__(self, cells):
        self.cells = cells
        super().__init__(f"aggregate is missing cells: {sorted(cells)}")


def emit_figure_data(aggregates: dict, figure: str) -> list[dict]:
    """Long-format rows for one of the three evaluation figures.

    latency / availability: one row per (policy, load, slice type);
    qos: emergency slice only.  Cells whose metric is empty (slice never
    active in those runs) are skipped.
    """
    if figure not in FIGURES:
        raise ValueError(f"unknown figure {figure!r}")
    missing = [k for k, cell in aggregates.items() if not cell]
    if missing:
        raise MissingCellsError(missing)
    rows = []
    for (policy, load) in sorted(aggregates):
        cell = aggregates[(policy, load)]
        if figure == "qos":
            slice_types = ("emergency",)
        else:
            slice_types = ("embb", "regular", "emergency")
        for st in slice_types:
            a = cell.get(st)
            if a is None:
                continue
            if figure == "latency":
                value = a.get("mean_latency_ms", float("nan"))
                ci = a.get("latency_ci95", a.get("ci95", float("nan")))
            elif figure == "availability":
                value = a.get("pr_A_gt_target", a.get("pr_A_gt_099", float("nan")))
                ci = 0.0
            else:
                value = a.get("qos_met", float("nan"))
                ci = a.get("qos_ci95", a.get("ci95", float("nan")))
            if value != value:
                continue
            rows.append({"policy": policy, "active_fraction": load,
                         "slice_type": st, "value": value, "ci95": ci})
    return rows


def write_figure_csv(rows: list[dict], path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["policy", "active_fraction",
                                           "slice_type", "value", "ci95"])
        w.writeheader()
        for r in rows:
            w.writerow({**r, "value": f"{r['value']:.6f}",
                        "ci95": f"{r['ci95']:.6f}" if r["ci95"] == r["ci95"] else ""})
