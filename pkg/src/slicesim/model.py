"""Shared domain types for the cascaded WLAN/FWA uplink simulator.

Time is integer microseconds throughout, so all millisecond QoS budgets
convert exactly and deadlines never suffer floating-point drift.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

US_PER_MS = 1_000
US_PER_S = 1_000_000

# Floor for the exponentially averaged served rate (bits/s).  Keeps PF and
# M-LWDF metrics finite for links that have never been served.
AVG_RATE_FLOOR = 1_000.0


def ms_to_us(ms: float) -> int:
    return int(round(ms * US_PER_MS))


def s_to_us(s: float) -> int:
    return int(round(s * US_PER_S))


class SliceType(enum.IntEnum):
    EMBB = 0
    REGULAR_MONITORING = 1
    EMERGENCY = 2

    @property
    def is_healthcare(self) -> bool:
        return self is not SliceType.EMBB


class SliceState(enum.Enum):
    ACTIVE = "active"
    PROMOTING = "promoting"
    DEMOTING = "demoting"


@dataclass(frozen=True)
class QoSProfile:
    """One row of the monitoring-device requirement catalog."""

    e2e_latency_budget_ms: float
    jitter_budget_ms: float
    survival_time_ms: float
    agg_rate_bps: float
    drop_prob_target: float = 0.01  # delta used by the M-LWDF weight

    def __post_init__(self):
        if self.e2e_latency_budget_ms <= 0 or self.jitter_budget_ms <= 0:
            raise ValueError("latency and jitter budgets must be positive")
        if self.survival_time_ms <= 0 or self.agg_rate_bps <= 0:
            raise ValueError("survival time and rate must be positive")
        if not 0.0 < self.drop_prob_target < 1.0:
            raise ValueError("drop_prob_target must be in (0, 1)")

    def survival_us(self, rule: str = "table") -> int:
        """Survival deadline in microseconds.

        rule="table" uses the catalog's survival column verbatim;
        rule="sum" uses latency budget + jitter budget instead.
        """
        if rule == "sum":
            return ms_to_us(self.e2e_latency_budget_ms + self.jitter_budget_ms)
        if rule == "table":
            return ms_to_us(self.survival_time_ms)
        raise ValueError(f"unknown survival rule {rule!r}")


@dataclass(frozen=True)
class FlowSpec:
    device_name: str
    qos: QoSProfile
    slice_type: SliceType
    packet_period_ms: int = 10

    def __post_init__(self):
        size = self.packet_size_bits
        if size * (1000 // self.packet_period_ms) != self.qos.agg_rate_bps:
            raise ValueError(
                f"{self.device_name}: rate {self.qos.agg_rate_bps} bps does not "
                f"packetize evenly at period {self.packet_period_ms} ms"
            )

    @property
    def packet_size_bits(self) -> int:
        return int(self.qos.agg_rate_bps * self.packet_period_ms / 1000)

    @property
    def period_us(self) -> int:
        return ms_to_us(self.packet_period_ms)


@dataclass
class SliceInstance:
    slice_id: int
    current_type: SliceType
    flows: list = field(default_factory=list)
    weight: float = 1.0
    state: SliceState = SliceState.ACTIVE

    @property
    def priority(self) -> bool:
        # Default partition of the Elastic policy: healthcare slices carry
        # priority, the eMBB slice does not.
        return self.current_type.is_healthcare


class Packet:
    """One application message traversing the two-hop cascade."""

    __slots__ = (
        "pid", "flow_name", "slice_id", "slice_type", "size_bits",
        "created_us", "deadline_us", "remaining_bits", "hop1_delay_us",
        "rg_arrival_us", "first_service_us", "retx_count", "delivered_us",
        "outcome",
    )

    def __init__(self, pid: int, flow_name: str, slice_id: int,
                 slice_type: SliceType, size_bits: int, created_us: int,
                 deadline_us: int):
        self.pid = pid
        self.flow_name = flow_name
        self.slice_id = slice_id
        self.slice_type = slice_type
        self.size_bits = size_bits
        self.created_us = created_us
        self.deadline_us = deadline_us
        self.remaining_bits = float(size_bits)
        self.hop1_delay_us = 0
        self.rg_arrival_us = -1
        self.first_service_us = -1
        self.retx_count = 0
        self.delivered_us = -1
        self.outcome = ""


def deadline_of(created_us: int, qos: QoSProfile, rule: str = "table") -> int:
    """Absolute survival deadline of a packet created at `created_us`."""
    return created_us + qos.survival_us(rule)


@dataclass(frozen=True)
class ResourceGrid:
    """Per-interval supply of abstract resource units for one hop."""

    hop: str  # "wlan" | "fwa"
    interval_us: int
    units_per_interval: int
    legacy_reserved_fraction: float = 0.0

    def __post_init__(self):
        if self.units_per_interval <= 0:
            raise ValueError("units_per_interval must be positive")
        if not 0.0 <= self.legacy_reserved_fraction < 1.0:
            raise ValueError("legacy_reserved_fraction must be in [0, 1)")


def usable_units(grid: ResourceGrid) -> int:
    """Units actually schedulable per interval after the legacy reservation."""
    return math.floor(grid.units_per_interval * (1.0 - grid.legacy_reserved_fraction))


@dataclass
class LinkState:
    """Abstract link: spectral efficiency, BLER target and served-rate EWMA."""

    spectral_efficiency: float  # bits per resource unit
    target_bler: float
    avg_rate_bps: float = AVG_RATE_FLOOR

    def __post_init__(self):
        if self.spectral_efficiency <= 0:
            raise ValueError("spectral efficiency must be positive")
        if not 0.0 <= self.target_bler < 1.0:
            raise ValueError("target_bler must be in [0, 1)")
        self.avg_rate_bps = max(self.avg_rate_bps, AVG_RATE_FLOOR)
