"""Per-interval radio-resource allocation for one hop.

Three policies share one allocation engine:

* basic   -- no slicing; proportional-fair metric over all queued flows.
* e2e     -- per-slice queues, M-LWDF metric (a*W*r/Rbar, a = -ln(delta)/tau)
             weighted by the slice weights, no quotas, no drops.
* elastic -- expired-packet dropping, per-window demand estimation with
             proportional quota scaling under overload, and a strict
             priority pass (healthcare before eMBB) in every interval.

Queues are kept per flow (FIFO, hence sorted by accumulated delay) with the
head-of-line state mirrored into numpy arrays so the per-interval argmax
stays cheap even with ~100 active flows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from collections import deque

import numpy as np

from .model import (AVG_RATE_FLOOR, LinkState, Packet, QoSProfile,
                    ResourceGrid, SliceInstance, SliceType, usable_units)
from .phy import ChannelModel, HopConfig

_NEG_INF = float("-inf")
_MIN_TAU_S = 1e-3


@dataclass(frozen=True)
class PolicyConfig:
    name: str = "elastic"  # "basic" | "e2e" | "elastic"
    window_ms: int = 100
    alpha: float = 1.0  # eMBB slice weight
    beta: float = 2.0   # healthcare slice weight
    delta_default: float = 0.01
    ewma_factor: float = 0.01
    cross_hop_reporting: bool = True
    survival_rule: str = "table"

    def __post_init__(self):
        if self.name not in ("basic", "e2e", "elastic"):
            raise ValueError(f"unknown policy {self.name!r}")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("slice weights must be positive")
        if not 0.0 < self.ewma_factor < 1.0:
            raise ValueError("ewma_factor must be in (0, 1)")


@dataclass(frozen=True)
class DemandEstimate:
    slice_ref: int
    requested_units: int
    healthcare: bool = False

    def __post_init__(self):
        if self.requested_units < 0:
            raise ValueError("requested_units must be non-negative")


def pf_metric(link: LinkState, achievable_rate_bps: float) -> float:
    """Proportional-fair metric: instantaneous achievable rate over Rbar."""
    return achievable_rate_bps / max(link.avg_rate_bps, AVG_RATE_FLOOR)


def mlwdf_metric(qos: QoSProfile, hol_delay_s: float, link: LinkState,
                 achievable_rate_bps: float, tau_s: float | None = None) -> float:
    """M-LWDF metric a*W*(r/Rbar) with a = -ln(delta)/tau.

    tau defaults to the flow's end-to-end latency budget; callers tracking
    cross-hop delay pass the remaining budget instead.
    """
    if tau_s is None:
        tau_s = qos.e2e_latency_budget_ms / 1000.0
    a = -math.log(qos.drop_prob_target) / max(tau_s, _MIN_TAU_S)
    return a * hol_delay_s * pf_metric(link, achievable_rate_bps)


def update_avg_rate(link: LinkState, served_bits: float, interval_s: float,
                    ewma_factor: float) -> LinkState:
    """EWMA of the served rate, floored to keep PF/M-LWDF metrics finite."""
    inst = served_bits / interval_s
    link.avg_rate_bps = max((1.0 - ewma_factor) * link.avg_rate_bps
                            + ewma_factor * inst, AVG_RATE_FLOOR)
    return link


def estimate_demand(slice_ref: int, backlog_bits: float, agg_rate_bps: float,
                    window_s: float, mean_spectral_efficiency: float,
                    healthcare: bool = False) -> DemandEstimate:
    """Resource units a slice requests for the next window.

    The larger of the current backlog and the agreed aggregate rate over the
    window, converted to units at the slice's mean spectral efficiency.
    """
    bits = max(backlog_bits, agg_rate_bps * window_s)
    if bits <= 0:
        return DemandEstimate(slice_ref, 0, healthcare)
    units = math.ceil(bits / mean_spectral_efficiency)
    return DemandEstimate(slice_ref, units, healthcare)


def elastic_scale(demands: list[DemandEstimate], available_units: int) -> dict[int, int]:
    """Proportional quota scaling under overload.

    If the total request fits, every slice gets what it asked for.  Otherwise
    quotas are floor-scaled by available/total and the leftover units go one
    by one to the slices with the largest fractional part (ties broken
    healthcare-first, then lower slice id).
    """
    if available_units < 0:
        raise ValueError("available_units must be non-negative")
    total = sum(d.requested_units for d in demands)
    if total <= available_units:
        return {d.slice_ref: d.requested_units for d in demands}
    quotas = {}
    fracs = []
    assigned = 0
    for d in demands:
        exact = d.requested_units * available_units / total
        q = math.floor(exact)
        quotas[d.slice_ref] = q
        assigned += q
        fracs.append((-(exact - q), not d.healthcare, d.slice_ref))
    fracs.sort()
    for k in range(available_units - assigned):
        quotas[fracs[k][2]] += 1
    return quotas


def partition_priority(slices: list[SliceInstance]) -> tuple[list[SliceInstance], list[SliceInstance]]:
    """Two-set grouping: healthcare slices (emergency first) vs eMBB."""
    prio = [s for s in slices if s.priority]
    prio.sort(key=lambda s: (0 if s.current_type is SliceType.EMERGENCY else 1, s.slice_id))
    nonprio = [s for s in slices if not s.priority]
    nonprio.sort(key=lambda s: s.slice_id)
    return prio, nonprio


class LinkBank:
    """Per-device link state for one hop, with per-device RNG streams."""

    def __init__(self, n_links: int, channel: ChannelModel, target_bler: float,
                 seed_seq: np.random.SeedSequence):
        self.n = n_links
        self.channel = channel
        self.target_bler = target_bler
        self.eff = np.full(n_links, channel.eff_median, dtype=np.float64)
        self.avg = np.full(n_links, AVG_RATE_FLOOR, dtype=np.float64)
        self.served = np.zeros(n_links, dtype=np.float64)
        children = seed_seq.spawn(2 * n_links)
        self.chan_rng = [np.random.default_rng(s) for s in children[:n_links]]
        self.bler_rng = [np.random.default_rng(s) for s in children[n_links:]]

    def redraw(self) -> None:
        for i in range(self.n):
            self.eff[i] = self.channel.draw(self.chan_rng[i])

    def end_interval(self, ewma_factor: float, interval_s: float) -> None:
        self.avg *= (1.0 - ewma_factor)
        self.avg += ewma_factor * self.served / interval_s
        np.maximum(self.avg, AVG_RATE_FLOOR, out=self.avg)
        self.served[:] = 0.0

    def link_view(self, i: int) -> LinkState:
        return LinkState(spectral_efficiency=float(self.eff[i]),
                         target_bler=self.target_bler,
                         avg_rate_bps=float(self.avg[i]))


@dataclass
class FlowRuntime:
    idx: int
    name: str
    slice_id: int
    link_id: int
    qos: QoSProfile
    weight: float
    priority: bool
    active: bool = True
    queue: deque = field(default_factory=deque)


class HopScheduler:
    """Allocates one hop's resource units each scheduling interval."""

    def __init__(self, grid: ResourceGrid, hop_cfg: HopConfig,
                 policy: PolicyConfig, links: LinkBank,
                 slices: dict[int, SliceInstance], cross_hop: bool = False):
        self.grid = grid
        self.hop_cfg = hop_cfg
        self.policy = policy
        self.links = links
        self.slices = slices
        self.cross_hop = cross_hop
        self.usable = usable_units(grid)
        self.interval_us = grid.interval_us
        self.interval_s = grid.interval_us / 1e6
        # achievable rate if granted the entire grid, per bits/unit of efficiency
        self._rate_factor = self.usable / self.interval_s
        self.flows: list[FlowRuntime] = []
        self.on_delivered = None  # callback(pkt)
        self.on_finished = None   # callback(pkt) for drops/losses
        self.quotas: dict[int, int] = {}
        self.window_units = self.usable * max(1, policy.window_ms * 1000 // grid.interval_us)
        self._built = False

    # -- construction -----------------------------------------------------

    def add_flow(self, name: str, slice_id: int, link_id: int, qos: QoSProfile,
                 weight: float, priority: bool, active: bool = True) -> int:
        idx = len(self.flows)
        self.flows.append(FlowRuntime(idx, name, slice_id, link_id, qos,
                                      weight, priority, active))
        self._built = False
        return idx

    def finalize(self) -> None:
        n = len(self.flows)
        self.n = n
        self.link_ids = np.array([f.link_id for f in self.flows], dtype=np.intp)
        self.prio_mask = np.array([f.priority for f in self.flows], dtype=bool)
        self.backlog = np.zeros(n, dtype=np.float64)
        self.head_rem = np.zeros(n, dtype=np.float64)
        self.head_ref = np.zeros(n, dtype=np.float64)       # W basis, us
        self.head_deadline = np.full(n, np.inf, dtype=np.float64)
        self.coeff_tau = np.zeros(n, dtype=np.float64)      # weight*(-ln d)/tau
        self.slice_ids = np.array([f.slice_id for f in self.flows], dtype=np.intp)
        self.blocked = np.zeros(n, dtype=bool)
        self.nonempty = 0
        self._built = True

    # -- queue maintenance ------------------------------------------------

    def _set_head(self, i: int) -> None:
        fl = self.flows[i]
        if not fl.queue:
            self.head_rem[i] = 0.0
            self.head_deadline[i] = np.inf
            self.coeff_tau[i] = 0.0
            return
        pkt: Packet = fl.queue[0]
        self.head_rem[i] = pkt.remaining_bits
        self.head_deadline[i] = pkt.deadline_us
        if self.cross_hop and self.policy.cross_hop_reporting:
            ref = pkt.created_us
            tau_s = max(fl.qos.e2e_latency_budget_ms / 1000.0
                        - pkt.hop1_delay_us / 1e6, _MIN_TAU_S)
        elif self.cross_hop:
            ref = pkt.rg_arrival_us
            tau_s = fl.qos.e2e_latency_budget_ms / 1000.0
        else:
            ref = pkt.created_us
            tau_s = fl.qos.e2e_latency_budget_ms / 1000.0
        self.head_ref[i] = ref
        self.coeff_tau[i] = (fl.weight * -math.log(fl.qos.drop_prob_target)
                             / max(tau_s, _MIN_TAU_S))

    def enqueue(self, i: int, pkt: Packet) -> None:
        fl = self.flows[i]
        was_empty = not fl.queue
        fl.queue.append(pkt)
        self.backlog[i] += pkt.remaining_bits
        if was_empty:
            self.nonempty += 1
            self._set_head(i)

    def _pop_head(self, i: int) -> Packet:
        fl = self.flows[i]
        pkt = fl.queue.popleft()
        self.backlog[i] -= pkt.remaining_bits
        if not fl.queue:
            self.nonempty -= 1
            self.backlog[i] = 0.0
        self._set_head(i)
        return pkt

    # -- elastic machinery ------------------------------------------------

    def drop_expired(self, now_us: int) -> int:
        """Remove every queued packet whose survival deadline has passed."""
        dropped = 0
        if self.nonempty == 0:
            return 0
        stale = np.nonzero(self.head_deadline < now_us)[0]
        for i in stale:
            fl = self.flows[int(i)]
            while fl.queue and fl.queue[0].deadline_us < now_us:
                pkt = self._pop_head(int(i))
                pkt.outcome = "dropped_expired"
                dropped += 1
                if self.on_finished:
                    self.on_finished(pkt)
        return dropped

    def slice_backlog_bits(self, slice_id: int) -> float:
        return float(self.backlog[self.slice_ids == slice_id].sum())

    def start_window(self, now_us: int) -> dict[int, int]:
        """Recompute per-slice quotas for the next scheduling window."""
        window_s = self.policy.window_ms / 1000.0
        demands = []
        for sl in self.slices.values():
            flows = [f for f in self.flows if f.slice_id == sl.slice_id]
            if not flows:
                continue
            backlog = sum(float(self.backlog[f.idx]) for f in flows)
            rate = sum(f.qos.agg_rate_bps for f in flows if f.active)
            link_ids = sorted({f.link_id for f in flows if f.active})
            if link_ids:
                mean_eff = float(self.links.eff[link_ids].mean())
            else:
                mean_eff = float(self.links.eff.mean())
            demands.append(estimate_demand(sl.slice_id, backlog, rate,
                                           window_s, mean_eff,
                                           healthcare=sl.priority))
        self.quotas = elastic_scale(demands, self.window_units)
        return self.quotas

    # -- per-interval allocation ------------------------------------------

    def _metric(self, now_us: int) -> np.ndarray:
        eff = self.links.eff[self.link_ids]
        ratio = eff * self._rate_factor / self.links.avg[self.link_ids]
        if self.policy.name == "basic":
            m = ratio.copy()
        else:
            w = (now_us - self.head_ref) * 1e-6
            m = self.coeff_tau * w * ratio
        m[self.backlog <= 0.0] = _NEG_INF
        if self.policy.name == "elastic":
            # heads that can no longer be delivered in time are left for the
            # next drop pass rather than wasting units on a late delivery
            m[self.head_deadline < now_us + self.interval_us] = _NEG_INF
        return m

    def schedule_interval(self, now_us: int) -> list[tuple[int, int, int]]:
        """Allocate this interval's units; returns (pid, slice_id, units)."""
        if not self._built:
            self.finalize()
        allocations: list[tuple[int, int, int]] = []
        units_left = self.usable
        if self.nonempty == 0:
            return allocations
        if self.policy.name == "elastic":
            self.drop_expired(now_us)
            if self.nonempty == 0:
                return allocations
        self.blocked[:] = False
        metric = self._metric(now_us)
        elastic = self.policy.name == "elastic"
        if elastic:
            # priority pass, non-priority pass, then a work-conserving pass
            # that ignores quotas so capacity is never left idle
            phases = ((self.prio_mask, True), (~self.prio_mask, True), (None, False))
        else:
            phases = ((None, False),)
        deliver_t = now_us + self.interval_us
        for mask, use_quota in phases:
            if units_left <= 0:
                break
            mm = metric.copy()
            if mask is not None:
                mm[~mask] = _NEG_INF
            mm[self.blocked] = _NEG_INF
            while units_left > 0:
                i = int(np.argmax(mm))
                if mm[i] == _NEG_INF:
                    break
                fl = self.flows[i]
                lid = fl.link_id
                eff = self.links.eff[lid]
                need = math.ceil(self.head_rem[i] / eff)
                cap = units_left
                if use_quota:
                    cap = min(cap, self.quotas.get(fl.slice_id, 0))
                grant = min(need, cap)
                if grant <= 0:
                    mm[i] = _NEG_INF
                    continue
                pkt: Packet = fl.queue[0]
                if pkt.first_service_us < 0:
                    pkt.first_service_us = now_us
                units_left -= grant
                if use_quota:
                    self.quotas[fl.slice_id] -= grant
                allocations.append((pkt.pid, fl.slice_id, grant))
                bler = self.links.target_bler
                if bler > 0.0 and self.links.bler_rng[lid].random() < bler:
                    pkt.retx_count += 1
                    if pkt.retx_count > self.hop_cfg.max_retx:
                        self._pop_head(i)
                        pkt.outcome = "lost_retx"
                        if self.on_finished:
                            self.on_finished(pkt)
                        metric[i] = self._refresh_metric(i, now_us)
                        mm[i] = metric[i] if (mask is None or mask[i]) else _NEG_INF
                    else:
                        self.blocked[i] = True
                        mm[i] = _NEG_INF
                    continue
                served = min(self.head_rem[i], grant * eff)
                self.head_rem[i] -= served
                self.backlog[i] -= served
                pkt.remaining_bits = self.head_rem[i]
                self.links.served[lid] += served
                if self.head_rem[i] <= 1e-9:
                    self.backlog[i] += self.head_rem[i]  # clear residual
                    pkt.remaining_bits = 0.0
                    self._pop_head(i)
                    pkt.delivered_us = deliver_t
                    pkt.outcome = "delivered"
                    if self.on_delivered:
                        self.on_delivered(pkt)
                    metric[i] = self._refresh_metric(i, now_us)
                    mm[i] = metric[i] if (mask is None or mask[i]) else _NEG_INF
                # partially served heads keep their metric; the loop exits
                # via units_left or quota exhaustion
        return allocations

    def _refresh_metric(self, i: int, now_us: int) -> float:
        if self.backlog[i] <= 0.0 or self.blocked[i]:
            return _NEG_INF
        if self.policy.name == "elastic" and \
                self.head_deadline[i] < now_us + self.interval_us:
            return _NEG_INF
        lid = self.flows[i].link_id
        ratio = self.links.eff[lid] * self._rate_factor / self.links.avg[lid]
        if self.policy.name == "basic":
            return float(ratio)
        w = (now_us - self.head_ref[i]) * 1e-6
        return float(self.coeff_tau[i] * w * ratio)

    def end_interval(self) -> None:
        self.links.end_interval(self.policy.ewma_factor, self.interval_s)
