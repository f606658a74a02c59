"""Uplink traffic sources: the monitoring-device catalog and background eMBB.

Healthcare flows are strictly periodic packetizations of the catalog's
aggregate rates; eMBB traffic is either constant-rate or exponential
on/off bursts, both driven by per-source RNG streams so runs reproduce
bit-identically for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import FlowSpec, Packet, QoSProfile, SliceType, US_PER_S

# Device catalog: name -> (latency ms, jitter ms, survival ms, rate bps).
_REGULAR_ROWS = {
    "3D camera 1": (150, 30, 180, 10_000_000),
    "EEG": (250, 25, 175, 1_000_000),
}

_EMERGENCY_ROWS = {
    "3D camera 2": (150, 30, 180, 10_000_000),
    "Speaker": (150, 25, 175, 220_000),
    "ECG": (250, 25, 275, 500_000),
    "EMG": (250, 25, 275, 500_000),
    "SpO2": (250, 25, 275, 500_000),
    "Temperature": (250, 25, 275, 100_000),
    "Blood pressure": (250, 25, 275, 100_000),
    "Heart rate": (250, 25, 275, 100_000),
    "Respiration rate": (250, 25, 275, 100_000),
}


@dataclass
class FlowCatalog:
    regular_flows: dict[str, FlowSpec] = field(default_factory=dict)
    emergency_flows: dict[str, FlowSpec] = field(default_factory=dict)

    def all_flows(self) -> list[FlowSpec]:
        return list(self.regular_flows.values()) + list(self.emergency_flows.values())


def build_catalog(packet_period_ms: int = 10, delta: float = 0.01,
                  overrides: dict | None = None) -> FlowCatalog:
    """Instantiate the full monitoring-device catalog.

    `overrides` maps device name to a partial row dict
    ({latency_ms, jitter_ms, survival_ms, rate_bps}) replacing defaults.
    """
    overrides = overrides or {}

    def make(name, row, stype):
        lat, jit, surv, rate = row
        ov = overrides.get(name, {})
        qos = QoSProfile(
            e2e_latency_budget_ms=ov.get("latency_ms", lat),
            jitter_budget_ms=ov.get("jitter_ms", jit),
            survival_time_ms=ov.get("survival_ms", surv),
            agg_rate_bps=ov.get("rate_bps", rate),
            drop_prob_target=ov.get("delta", delta),
        )
        return FlowSpec(device_name=name, qos=qos, slice_type=stype,
                        packet_period_ms=packet_period_ms)

    cat = FlowCatalog()
    for name, row in _REGULAR_ROWS.items():
        cat.regular_flows[name] = make(name, row, SliceType.REGULAR_MONITORING)
    for name, row in _EMERGENCY_ROWS.items():
        cat.emergency_flows[name] = make(name, row, SliceType.EMERGENCY)
    return cat


def next_packet(flow: FlowSpec, now_us: int, pid: int, slice_id: int,
                slice_type: SliceType, survival_rule: str = "table"):
    """Emit the packet due at `now_us` and the next arrival time.

    Healthcare sources are strictly periodic with no jitter at the source.
    """
    pkt = Packet(
        pid=pid,
        flow_name=flow.device_name,
        slice_id=slice_id,
        slice_type=slice_type,
        size_bits=flow.packet_size_bits,
        created_us=now_us,
        deadline_us=now_us + flow.qos.survival_us(survival_rule),
    )
    return pkt, now_us + flow.period_us


@dataclass(frozen=True)
class EmbbTrafficModel:
    model: str = "poisson_bursts"  # "periodic_cbr" | "poisson_bursts"
    mean_rate_bps: float = 700_000.0
    mean_on_s: float = 0.2
    mean_off_s: float = 0.8
    packet_bits: int = 50_000
    qos: QoSProfile = QoSProfile(
        e2e_latency_budget_ms=300, jitter_budget_ms=1,
        survival_time_ms=100, agg_rate_bps=700_000.0, drop_prob_target=0.1)

    def __post_init__(self):
        if self.model not in ("periodic_cbr", "poisson_bursts"):
            raise ValueError(f"unknown eMBB model {self.model!r}")
        if self.mean_rate_bps <= 0 or self.packet_bits <= 0:
            raise ValueError("eMBB rate and packet size must be positive")
        if self.model == "poisson_bursts" and (self.mean_on_s <= 0 or self.mean_off_s <= 0):
            raise ValueError("on/off durations must be positive")

    @property
    def duty_cycle(self) -> float:
        return self.mean_on_s / (self.mean_on_s + self.mean_off_s)


def _duty(model: EmbbTrafficModel) -> float:
    return model.duty_cycle


class EmbbSource:
    """On/off (or CBR) packet arrival process for one residential gateway.

    Deterministic given its RNG stream: the same seed reproduces the same
    arrival sequence regardless of the surrounding simulation.
    """

    def __init__(self, model: EmbbTrafficModel, rng: np.random.Generator):
        self.model = model
        self.rng = rng
        self._burst_end_us = -1
        self._pkt_gap_us = 0
        if model.model == "periodic_cbr":
            self._pkt_gap_us = int(round(model.packet_bits / model.mean_rate_bps * US_PER_S))
        else:
            duty = _duty(model)
            burst_rate = model.mean_rate_bps / duty
            self._pkt_gap_us = int(round(model.packet_bits / burst_rate * US_PER_S))

    def first_arrival_us(self) -> int:
        if self.model.model == "periodic_cbr":
            # stagger sources uniformly over one packet period
            return int(self.rng.integers(0, max(self._pkt_gap_us, 1)))
        return self._next_burst_start(0)

    def _next_burst_start(self, now_us: int) -> int:
        off = self.rng.exponential(self.model.mean_off_s)
        on = self.rng.exponential(self.model.mean_on_s)
        start = now_us + int(off * US_PER_S)
        self._burst_end_us = start + int(on * US_PER_S)
        return start

    def next_arrival_after(self, arrival_us: int) -> int:
        """Time of the arrival following the one that just fired."""
        if self.model.model == "periodic_cbr":
            return arrival_us + self._pkt_gap_us
        nxt = arrival_us + self._pkt_gap_us
        if nxt <= self._burst_end_us:
            return nxt
        return self._next_burst_start(self._burst_end_us)


def embb_arrivals(model: EmbbTrafficModel, horizon_s: float,
                  rng: np.random.Generator) -> list[int]:
    """Standalone arrival stream (microsecond timestamps) over a horizon.

    Used for model validation; the engine drives EmbbSource incrementally.
    """
    src = EmbbSource(model, rng)
    horizon_us = int(horizon_s * US_PER_S)
    out = []
    t = src.first_arrival_us()
    while t < horizon_us:
        out.append(t)
        t = src.next_arrival_after(t)
    return out
