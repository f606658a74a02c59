"""Scenario configuration: dataclasses, YAML loading and the built-in
suburban case-study preset (88 households per sector, 2 monitored patients,
emergency window on patient 0)."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import yaml

from .model import ResourceGrid, ms_to_us, s_to_us
from .phy import ChannelModel, HopConfig
from .scheduler import PolicyConfig
from .traffic import EmbbTrafficModel
from .model import QoSProfile


@dataclass(frozen=True)
class PatientConfig:
    rg_id: int
    # (time_s, "promote"|"demote") pairs
    events: tuple = ()


@dataclass(frozen=True)
class HopSettings:
    units_per_interval: int
    interval_ms: float = 1.0
    legacy_fraction: float = 0.0
    target_bler: float = 0.01
    max_retx: int = 8
    access_delay_ms: float = 0.0
    eff_median: float = 45.0
    eff_sigma: float = 0.35
    eff_min: float = 5.0
    eff_max: float = 160.0
    coherence_ms: float = 100.0

    def grid(self, hop: str) -> ResourceGrid:
        return ResourceGrid(hop=hop, interval_us=ms_to_us(self.interval_ms),
                            units_per_interval=self.units_per_interval,
                            legacy_reserved_fraction=self.legacy_fraction)

    def hop_config(self, hop: str) -> HopConfig:
        return HopConfig(grid=self.grid(hop),
                         channel=ChannelModel(eff_median=self.eff_median,
                                              eff_sigma=self.eff_sigma,
                                              eff_min=self.eff_min,
                                              eff_max=self.eff_max,
                                              coherence_us=ms_to_us(self.coherence_ms)),
                         target_bler=self.target_bler,
                         max_retx=self.max_retx,
                         access_delay_us=ms_to_us(self.access_delay_ms))


# Calibrated so that the sector is comfortable at low load and clearly
# overloaded when most gateways are active (see README, calibration notes).
DEFAULT_WLAN = HopSettings(units_per_interval=100, legacy_fraction=0.3,
                           target_bler=0.1, access_delay_ms=1.0,
                           eff_median=500.0, eff_min=50.0, eff_max=2000.0)
DEFAULT_FWA = HopSettings(units_per_interval=1600, legacy_fraction=0.0,
                          target_bler=0.01,
                          eff_median=45.0, eff_min=5.0, eff_max=160.0)


def default_embb_model(mean_rate_bps: float = 700_000.0,
                       model: str = "poisson_bursts") -> EmbbTrafficModel:
    return EmbbTrafficModel(
        model=model, mean_rate_bps=mean_rate_bps,
        qos=QoSProfile(e2e_latency_budget_ms=300, jitter_budget_ms=1,
                       survival_time_ms=100, agg_rate_bps=mean_rate_bps,
                       drop_prob_target=0.1))


@dataclass(frozen=True)
class Scenario:
    n_rg_total: int = 88
    active_fraction: float = 0.3
    duration_s: float = 300.0
    warmup_s: float = 2.0
    seed: int = 1
    patients: tuple[PatientConfig, ...] = (
        PatientConfig(rg_id=0, events=((30.0, "promote"), (90.0, "demote"))),
        PatientConfig(rg_id=1, events=()),
    )
    policy: PolicyConfig = PolicyConfig()
    wlan: HopSettings = DEFAULT_WLAN
    fwa: HopSettings = DEFAULT_FWA
    embb: EmbbTrafficModel = field(default_factory=default_embb_model)
    activation_delay_ms: float = 50.0
    packet_period_ms: int = 10
    catalog_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.active_fraction <= 1.0:
            raise ValueError("active_fraction must be in (0, 1]")
        if self.duration_s <= 0:
            raise ValueError("duration must be positive")
        if self.warmup_s >= self.duration_s:
            raise ValueError("warmup must be shorter than the run")
        if len(self.patients) < 1:
            raise ValueError("at least one monitored patient is required")
        if self.n_active_rgs < len(self.patients):
            raise ValueError("active RG count below patient count")
        rg_ids = [p.rg_id for p in self.patients]
        if len(set(rg_ids)) != len(rg_ids):
            raise ValueError("duplicate patient RG ids")
        for p in self.patients:
            if not 0 <= p.rg_id < self.n_rg_total:
                raise ValueError(f"patient RG id {p.rg_id} out of range")

    @property
    def n_active_rgs(self) -> int:
        return max(len(self.patients), round(self.n_rg_total * self.active_fraction))

    @property
    def duration_us(self) -> int:
        return s_to_us(self.duration_s)

    @property
    def warmup_us(self) -> int:
        return s_to_us(self.warmup_s)


def paper_case(**kw) -> Scenario:
    """The case-study preset: 88 RGs, 2 patients, 60 s emergency window."""
    return replace(Scenario(), **kw)


def _hop_from_dict(d: dict, base: HopSettings) -> HopSettings:
    return replace(base, **d)


def scenario_from_dict(doc: dict) -> Scenario:
    """Build a Scenario from a nested config dict (YAML document)."""
    sc = doc.get("scenario", {})
    kw = {}
    for key in ("n_rg_total", "active_fraction", "duration_s", "warmup_s",
                "seed", "activation_delay_ms", "packet_period_ms"):
        if key in sc:
            kw[key] = sc[key]
    if "patients" in doc:
        kw["patients"] = tuple(
            PatientConfig(rg_id=p["rg_id"],
                          events=tuple((e["t_s"], e["kind"]) for e in p.get("events", [])))
            for p in doc["patients"])
    if "policy" in doc:
        kw["policy"] = PolicyConfig(**doc["policy"])
    if "wlan" in doc:
        kw["wlan"] = _hop_from_dict(doc["wlan"], DEFAULT_WLAN)
    if "fwa" in doc:
        kw["fwa"] = _hop_from_dict(doc["fwa"], DEFAULT_FWA)
    if "embb" in doc:
        e = dict(doc["embb"])
        qos = e.pop("qos", None)
        mean = e.get("mean_rate_bps", 700_000.0)
        model = default_embb_model(mean_rate_bps=mean,
                                   model=e.pop("model", "poisson_bursts"))
        if qos:
            model = replace(model, qos=QoSProfile(
                e2e_latency_budget_ms=qos.get("latency_ms", 300),
                jitter_budget_ms=qos.get("jitter_ms", 1),
                survival_time_ms=qos.get("survival_ms", 100),
                agg_rate_bps=mean,
                drop_prob_target=qos.get("delta", 0.1)))
        e.pop("mean_rate_bps", None)
        model = replace(model, **e)
        kw["embb"] = model
    if "catalog_overrides" in doc:
        kw["catalog_overrides"] = doc["catalog_overrides"]
    return Scenario(**kw)


def load_scenario(path: str) -> Scenario:
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    if doc.get("preset") == "paper-case":
        doc.pop("preset")
        base = scenario_from_dict(doc)
        return base
    return scenario_from_dict(doc)
