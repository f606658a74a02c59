"""Evaluation metrics computed from per-packet run traces: end-to-end
latency statistics, communication service availability, and the fraction
of packets meeting their QoS deadline.  All are pure functions of the
trace, so recomputation from a stored trace matches the in-run values."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from .engine import PacketRecord, RunResult

_HEALTHCARE = ("regular", "emergency")


@dataclass(frozen=True)
class LatencyStats:
    mean_ms: float
    p95_ms: float
    count: int

    @property
    def empty(self) -> bool:
        return self.count == 0


def _measured(records, warmup_us: int):
    return [r for r in records if r.created_us >= warmup_us]


def e2e_latency_stats(records: list[PacketRecord], slice_type: str,
                      warmup_us: int = 0) -> LatencyStats:
    """Latency over delivered packets of one slice type.

    Dropped and lost packets are excluded here; they are accounted for by
    the availability and QoS-met metrics.
    """
    lats = [(r.delivered_us - r.created_us) / 1000.0
            for r in _measured(records, warmup_us)
            if r.slice_type == slice_type and r.outcome == "delivered"]
    if not lats:
        return LatencyStats(float("nan"), float("nan"), 0)
    lats.sort()
    n = len(lats)
    p95 = lats[min(n - 1, math.ceil(0.95 * n) - 1)]
    return LatencyStats(sum(lats) / n, p95, n)


def availability(records: list[PacketRecord], slice_type: str,
                 horizon_us: int, warmup_us: int = 0,
                 window_us: int = 1_000_000) -> float:
    """Fraction of observation windows in which the slice met its QoS.

    A window is unavailable if any packet whose survival deadline falls in
    it was dropped, lost, or not delivered by that deadline.  Windows tile
    [warmup, horizon).  Returns NaN when the slice saw no traffic.
    """
    span = horizon_us - warmup_us
    n_windows = span // window_us
    if n_windows <= 0:
        return float("nan")
    violated = set()
    active = set()
    for r in _measured(records, warmup_us):
        if r.slice_type != slice_type:
            continue
        due = r.deadline_us
        w = (due - warmup_us) // window_us
        if w < 0 or w >= n_windows:
            continue
        active.add(w)
        if r.outcome != "delivered" or r.delivered_us > due:
            violated.add(w)
    if not active:
        return float("nan")
    return 1.0 - len(violated) / n_windows


def qos_met_fraction(records: list[PacketRecord], slice_type: str,
                     warmup_us: int = 0) -> float:
    """Delivered-within-survival-deadline packets over generated packets."""
    total = 0
    met = 0
    for r in _measured(records, warmup_us):
        if r.slice_type != slice_type:
            continue
        total += 1
        if r.outcome == "delivered" and r.delivered_us <= r.deadline_us:
            met += 1
    if total == 0:
        return float("nan")
    return met / total


@dataclass(frozen=True)
class RunMetrics:
    slice_type: str
    mean_latency_ms: float
    p95_latency_ms: float
    delivered: int
    availability: float
    qos_met: float


def summarize_run(result: RunResult, window_us: int = 1_000_000) -> dict[str, RunMetrics]:
    """Per-slice-type metrics for one completed run."""
    warmup = result.scenario.warmup_us
    horizon = result.scenario.duration_us
    out = {}
    for st in ("embb", "regular", "emergency"):
        ls = e2e_latency_stats(result.records, st, warmup)
        out[st] = RunMetrics(
            slice_type=st,
            mean_latency_ms=ls.mean_ms,
            p95_latency_ms=ls.p95_ms,
            delivered=ls.count,
            availability=availability(result.records, st, horizon, warmup,
                                      window_us),
            qos_met=qos_met_fraction(result.records, st, warmup),
        )
    return out


def aggregate(per_seed: list[dict[str, RunMetrics]],
              availability_target: float = 0.99) -> dict[str, dict]:
    """Cross-seed aggregation: means, 95% CIs and Pr(A > target)."""
    out = {}
    for st in ("embb", "regular", "emergency"):
        lats = [m[st].mean_latency_ms for m in per_seed
                if not math.isnan(m[st].mean_latency_ms)]
        qoss = [m[st].qos_met for m in per_seed if not math.isnan(m[st].qos_met)]
        avails = [m[st].availability for m in per_seed
                  if not math.isnan(m[st].availability)]
        out[st] = {
            "mean_latency_ms": _mean(lats),
            "latency_ci95": _ci95(lats),
            "qos_met": _mean(qoss),
            "qos_ci95": _ci95(qoss),
            "pr_A_gt_target": (sum(1 for a in avails if a > availability_target)
                               / len(avails)) if avails else float("nan"),
            "seeds": len(per_seed),
        }
    return out


def _mean(xs):
    return sum(xs) / len(xs) if xs else float("nan")


def _ci95(xs):
    if len(xs) < 2:
        return 0.0 if xs else float("nan")
    m = _mean(xs)
    var = sum((x - m) ** 2 for x in xs) / (len(xs) - 1)
    return 1.96 * math.sqrt(var / len(xs))


def load_trace(path: str, deadline_by_flow: dict[str, int]) -> list[PacketRecord]:
    """Rebuild packet records from a stored trace CSV.

    `deadline_by_flow` maps flow name to its survival time (us), which the
    trace format does not carry explicitly.
    """
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            created = int(row["created_us"])
            surv = deadline_by_flow[row["flow"]]
            out.append(PacketRecord(
                pid=int(row["packet_id"]),
                slice_type=row["slice_type"],
                flow=row["flow"],
                created_us=created,
                hop1_delay_us=int(row["hop1_delay_us"]) if row["hop1_delay_us"] else -1,
                rg_wait_us=int(row["rg_wait_us"]) if row["rg_wait_us"] else -1,
                delivered_us=int(row["delivered_us"]) if row["delivered_us"] else -1,
                outcome=row["outcome"],
                deadline_us=created + surv,
                size_bits=0,
            ))
    return out
