"""Deterministic two-hop simulation: in-home WLAN hop per patient, per-slice
gateway queues, and the shared FWA sector hop, with cross-hop delay
accounting and per-entity RNG streams."""

from __future__ import annotations

import csv
import heapq
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from .config import Scenario
from .control import (ActivationProfile, EventKind, InvalidTransition,
                      SliceEvent, apply_event, commit_transition)
from .model import Packet, SliceInstance, SliceState, SliceType, ms_to_us
from .scheduler import HopScheduler, LinkBank
from .traffic import EmbbSource, build_catalog

PacketRecord = namedtuple("PacketRecord", [
    "pid", "slice_type", "flow", "created_us", "hop1_delay_us",
    "rg_wait_us", "delivered_us", "outcome", "deadline_us", "size_bits",
])

TransitionRecord = namedtuple("TransitionRecord", [
    "patient", "kind", "requested_us", "effective_us",
])

_SLICE_TYPE_NAME = {SliceType.EMBB: "embb",
                    SliceType.REGULAR_MONITORING: "regular",
                    SliceType.EMERGENCY: "emergency"}

# event kinds in the global queue
_ARR_HC = 0      # healthcare packet joins its home WLAN queue
_ARR_EMBB = 1    # eMBB packet arrives at its gateway (FWA queue)
_ENQ_FWA = 2     # WLAN-delivered packet reaches the gateway slice queue
_SLICE_REQ = 3   # promotion/demotion requested
_SLICE_EFF = 4   # transition takes effect


@dataclass
class RunResult:
    scenario: Scenario
    records: list = field(default_factory=list)
    transitions: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    alloc_violations: int = 0

    def conservation_ok(self) -> bool:
        c = self.counters
        return c["generated"] == (c["delivered"] + c["dropped_expired"]
                                  + c["lost_retx"] + c["in_flight"])


class _HomeState:
    __slots__ = ("patient_idx", "slice_", "sched", "links", "flow_idx",
                 "fwa_idx", "epoch")

    def __init__(self, patient_idx, slice_, sched, links):
        self.patient_idx = patient_idx
        self.slice_ = slice_
        self.sched = sched
        self.links = links
        self.flow_idx = {}   # flow name -> wlan queue index
        self.fwa_idx = {}    # flow name -> fwa queue index
        self.epoch = 0


class Engine:
    """One simulation run over a fully specified scenario."""

    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.catalog = build_catalog(scenario.packet_period_ms,
                                     scenario.policy.delta_default,
                                     scenario.catalog_overrides)
        self.profile = ActivationProfile(ms_to_us(scenario.activation_delay_ms))
        self.records: list[PacketRecord] = []
        self.transitions: list[TransitionRecord] = []
        self.counters = {"generated": 0, "delivered": 0, "dropped_expired": 0,
                         "lost_retx": 0, "in_flight": 0}
        self.alloc_violations = 0
        self._pid = 0
        self._seq = 0
        self._heap: list = []
        self._build()

    # -- construction -----------------------------------------------------

    def _build(self) -> None:
        sc = self.sc
        wlan_cfg = sc.wlan.hop_config("wlan")
        fwa_cfg = sc.fwa.hop_config("fwa")
        if wlan_cfg.grid.interval_us != fwa_cfg.grid.interval_us:
            raise ValueError("hop scheduling intervals must be aligned")
        self.interval_us = fwa_cfg.grid.interval_us
        self.wlan_cfg = wlan_cfg
        self.fwa_cfg = fwa_cfg

        ss = np.random.SeedSequence(sc.seed)
        n_p = len(sc.patients)
        keys = ss.spawn(3)
        home_seeds = keys[0].spawn(n_p)
        fwa_seed = keys[1]
        embb_seeds = keys[2].spawn(sc.n_rg_total)

        self.embb_slice = SliceInstance(slice_id=0, current_type=SliceType.EMBB,
                                        weight=sc.policy.alpha)
        self.patient_slices = [
            SliceInstance(slice_id=1 + i,
                          current_type=SliceType.REGULAR_MONITORING,
                          weight=sc.policy.beta)
            for i in range(n_p)]

        # FWA hop: one link per active gateway
        active_rgs = self._active_rg_ids()
        self.active_rgs = active_rgs
        rg_link = {rg: k for k, rg in enumerate(active_rgs)}
        fwa_links = LinkBank(len(active_rgs), fwa_cfg.channel,
                             fwa_cfg.target_bler, fwa_seed)
        slices = {0: self.embb_slice}
        for s in self.patient_slices:
            slices[s.slice_id] = s
        self.fwa = HopScheduler(fwa_cfg.grid, fwa_cfg, sc.policy, fwa_links,
                                slices, cross_hop=True)
        self.fwa_links = fwa_links

        # patient homes: WLAN hop with one link per in-home device
        all_flows = self.catalog.all_flows()
        self.homes: list[_HomeState] = []
        for i, pat in enumerate(sc.patients):
            slice_ = self.patient_slices[i]
            links = LinkBank(len(all_flows), wlan_cfg.channel,
                             wlan_cfg.target_bler, home_seeds[i])
            sched = HopScheduler(wlan_cfg.grid, wlan_cfg, sc.policy, links,
                                 {slice_.slice_id: slice_}, cross_hop=False)
            home = _HomeState(i, slice_, sched, links)
            for li, fs in enumerate(all_flows):
                active = fs.slice_type is SliceType.REGULAR_MONITORING
                wi = sched.add_flow(fs.device_name, slice_.slice_id, li,
                                    fs.qos, slice_.weight, True, active)
                fi = self.fwa.add_flow(f"{fs.device_name}@p{i}", slice_.slice_id,
                                       rg_link[pat.rg_id], fs.qos,
                                       slice_.weight, True, active)
                home.flow_idx[fs.device_name] = wi
                home.fwa_idx[fs.device_name] = fi
                slice_.flows.append(fs)
            sched.finalize()
            sched.on_delivered = self._make_wlan_delivered(home)
            sched.on_finished = self._record_hop1_finished
            self.homes.append(home)

        # eMBB sources: one per active gateway, injected at the RG
        self.embb_sources = {}
        self.embb_fwa_idx = {}
        for rg in active_rgs:
            src = EmbbSource(sc.embb, np.random.default_rng(embb_seeds[rg]))
            fi = self.fwa.add_flow(f"embb_rg{rg}", 0, rg_link[rg],
                                   sc.embb.qos, sc.policy.alpha, False, True)
            self.embb_sources[rg] = src
            self.embb_fwa_idx[rg] = fi
            self.embb_slice.flows.append(sc.embb)
        self.fwa.finalize()
        self.fwa.on_delivered = self._record_fwa_delivered
        self.fwa.on_finished = self._record_fwa_finished

    def _active_rg_ids(self) -> list[int]:
        sc = self.sc
        n_active = sc.n_active_rgs
        ids = [p.rg_id for p in sc.patients]
        for rg in range(sc.n_rg_total):
            if len(ids) >= n_active:
                break
            if rg not in ids:
                ids.append(rg)
        return sorted(ids)

    # -- event plumbing ---------------------------------------------------

    def _push(self, t: int, kind: int, payload) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (t, self._seq, kind, payload))

    def _make_wlan_delivered(self, home: _HomeState):
        def cb(pkt: Packet):
            pkt.hop1_delay_us = pkt.delivered_us - pkt.created_us
            pkt.outcome = ""
            pkt.delivered_us = -1
            pkt.retx_count = 0
            pkt.first_service_us = -1
            fi = home.fwa_idx[pkt.flow_name]
            self._push(pkt.created_us + pkt.hop1_delay_us, _ENQ_FWA, (fi, pkt))
        return cb

    def _record_hop1_finished(self, pkt: Packet) -> None:
        self.counters[pkt.outcome] += 1
        self.records.append(PacketRecord(
            pkt.pid, _SLICE_TYPE_NAME[pkt.slice_type], pkt.flow_name,
            pkt.created_us, -1, -1, -1, pkt.outcome, pkt.deadline_us,
            pkt.size_bits))

    def _record_fwa_delivered(self, pkt: Packet) -> None:
        self.counters["delivered"] += 1
        rg_wait = pkt.first_service_us - pkt.rg_arrival_us
        self.records.append(PacketRecord(
            pkt.pid, _SLICE_TYPE_NAME[pkt.slice_type], pkt.flow_name,
            pkt.created_us, pkt.hop1_delay_us, rg_wait, pkt.delivered_us,
            "delivered", pkt.deadline_us, pkt.size_bits))

    def _record_fwa_finished(self, pkt: Packet) -> None:
        self.counters[pkt.outcome] += 1
        rg_wait = pkt.first_service_us - pkt.rg_arrival_us \
            if pkt.first_service_us >= 0 else -1
        self.records.append(PacketRecord(
            pkt.pid, _SLICE_TYPE_NAME[pkt.slice_type], pkt.flow_name,
            pkt.created_us, pkt.hop1_delay_us, rg_wait, -1, pkt.outcome,
            pkt.deadline_us, pkt.size_bits))

    def _new_packet(self, flow_name: str, slice_: SliceInstance, size_bits: int,
                    created_us: int, survival_us: int) -> Packet:
        self._pid += 1
        self.counters["generated"] += 1
        return Packet(self._pid, flow_name, slice_.slice_id,
                      slice_.current_type, size_bits, created_us,
                      created_us + survival_us)

    # -- event handlers ---------------------------------------------------

    def _handle_hc_arrival(self, payload) -> None:
        home_idx, flow_name, emit_us, epoch = payload
        home = self.homes[home_idx]
        fs = (self.catalog.regular_flows.get(flow_name)
              or self.catalog.emergency_flows[flow_name])
        emergency_flow = flow_name in self.catalog.emergency_flows
        if emergency_flow and (epoch != home.epoch
                               or home.slice_.current_type is not SliceType.EMERGENCY):
            return  # demoted while the arrival was pending
        pkt = self._new_packet(flow_name, home.slice_, fs.packet_size_bits,
                               emit_us, fs.qos.survival_us(self.sc.policy.survival_rule))
        home.sched.enqueue(home.flow_idx[flow_name], pkt)
        nxt = emit_us + fs.period_us
        self._push(nxt + self.wlan_cfg.access_delay_us, _ARR_HC,
                   (home_idx, flow_name, nxt, epoch))

    def _handle_embb_arrival(self, payload) -> None:
        rg, arr_us = payload
        src = self.embb_sources[rg]
        pkt = self._new_packet(f"embb_rg{rg}", self.embb_slice,
                               self.sc.embb.packet_bits, arr_us,
                               self.sc.embb.qos.survival_us(self.sc.policy.survival_rule))
        pkt.rg_arrival_us = arr_us
        self.fwa.enqueue(self.embb_fwa_idx[rg], pkt)
        self._push(src.next_arrival_after(arr_us), _ARR_EMBB, (rg,))
        # the heap entry time is the authoritative arrival instant; payload
        # carries only the source id and the time is re-read on pop

    def _handle_slice_request(self, payload) -> None:
        patient_idx, kind, t = payload
        home = self.homes[patient_idx]
        ev = SliceEvent(t, kind, patient_idx)
        try:
            eff = apply_event(home.slice_, ev, self.profile)
        except InvalidTransition:
            self.transitions.append(TransitionRecord(patient_idx,
                                                     f"rejected-{kind.value}", t, -1))
            return
        self._push(eff, _SLICE_EFF, (patient_idx, kind, t))

    def _handle_slice_effective(self, payload) -> None:
        patient_idx, kind, requested = payload
        home = self.homes[patient_idx]
        commit_transition(home.slice_)
        eff_t = requested + self.profile.activation_delay_us
        self.transitions.append(TransitionRecord(patient_idx, kind.value,
                                                 requested, eff_t))
        emergency = home.slice_.current_type is SliceType.EMERGENCY
        for fs in self.catalog.emergency_flows.values():
            wi = home.flow_idx[fs.device_name]
            fi = home.fwa_idx[fs.device_name]
            home.sched.flows[wi].active = emergency
            self.fwa.flows[fi].active = emergency
        if emergency:
            for fs in self.catalog.emergency_flows.values():
                self._push(eff_t + self.wlan_cfg.access_delay_us, _ARR_HC,
                           (patient_idx, fs.device_name, eff_t, home.epoch))
        else:
            home.epoch += 1  # cancels pending emergency arrivals

    # -- main loop --------------------------------------------------------

    def run(self) -> RunResult:
        sc = self.sc
        interval = self.interval_us
        access = self.wlan_cfg.access_delay_us
        # initial healthcare emissions at t=0
        for i, home in enumerate(self.homes):
            for fs in self.catalog.regular_flows.values():
                self._push(access, _ARR_HC, (i, fs.device_name, 0, home.epoch))
        # initial eMBB arrivals
        for rg, src in self.embb_sources.items():
            self._push(src.first_arrival_us(), _ARR_EMBB, (rg,))
        # scheduled slice events
        for i, pat in enumerate(sc.patients):
            for t_s, kind in pat.events:
                self._push(int(t_s * 1e6), _SLICE_REQ,
                           (i, EventKind(kind), int(t_s * 1e6)))

        elastic = sc.policy.name == "elastic"
        window_us = ms_to_us(sc.policy.window_ms)
        wlan_coh = self.wlan_cfg.channel.coherence_us
        fwa_coh = self.fwa_cfg.channel.coherence_us
        duration = sc.duration_us
        heap = self._heap
        fwa = self.fwa
        usable_fwa = fwa.usable
        usable_wlan = self.homes[0].sched.usable if self.homes else 0

        now = 0
        while now < duration:
            while heap and heap[0][0] <= now:
                t, _, kind, payload = heapq.heappop(heap)
                if kind == _ARR_HC:
                    self._handle_hc_arrival(payload)
                elif kind == _ARR_EMBB:
                    self._handle_embb_arrival((payload[0], t))
                elif kind == _ENQ_FWA:
                    fi, pkt = payload
                    fwa.enqueue(fi, pkt)
                elif kind == _SLICE_REQ:
                    self._handle_slice_request(payload)
                else:
                    self._handle_slice_effective(payload)
            if now % wlan_coh == 0:
                for home in self.homes:
                    home.links.redraw()
            if now % fwa_coh == 0:
                self.fwa_links.redraw()
            if elastic and now % window_us == 0:
                fwa.start_window(now)
                for home in self.homes:
                    home.sched.start_window(now)
            for home in self.homes:
                s = home.sched
                if s.nonempty:
                    alloc = s.schedule_interval(now)
                    if sum(a[2] for a in alloc) > usable_wlan:
                        self.alloc_violations += 1
                    s.end_interval()
            if fwa.nonempty:
                alloc = fwa.schedule_interval(now)
                if sum(a[2] for a in alloc) > usable_fwa:
                    self.alloc_violations += 1
                fwa.end_interval()
            now += interval

        self._flush_in_flight()
        return RunResult(scenario=sc, records=self.records,
                         transitions=self.transitions, counters=self.counters,
                         alloc_violations=self.alloc_violations)

    def _flush_in_flight(self) -> None:
        for home in self.homes:
            for fl in home.sched.flows:
                for pkt in fl.queue:
                    self._record_in_flight(pkt, hop1=True)
        for fl in self.fwa.flows:
            for pkt in fl.queue:
                self._record_in_flight(pkt, hop1=False)
        for t, _, kind, payload in self._heap:
            if kind == _ENQ_FWA:
                self._record_in_flight(payload[1], hop1=False)

    def _record_in_flight(self, pkt: Packet, hop1: bool) -> None:
        self.counters["in_flight"] += 1
        hop1_delay = -1 if hop1 else pkt.hop1_delay_us
        rg_wait = -1
        if not hop1 and pkt.first_service_us >= 0:
            rg_wait = pkt.first_service_us - pkt.rg_arrival_us
        self.records.append(PacketRecord(
            pkt.pid, _SLICE_TYPE_NAME[pkt.slice_type], pkt.flow_name,
            pkt.created_us, hop1_delay, rg_wait, -1, "in_flight",
            pkt.deadline_us, pkt.size_bits))

    # -- buffer status report (cross-hop delay visibility) -----------------

    def report_buffer_status(self, patient_idx: int, now_us: int) -> dict:
        """Per-device queued bits and head-of-line delay at the WLAN hop."""
        home = self.homes[patient_idx]
        out = {}
        for fl in home.sched.flows:
            i = fl.idx
            if fl.queue:
                hol = now_us - fl.queue[0].created_us
                out[fl.name] = {"queued_bits": float(home.sched.backlog[i]),
                                "hol_delay_us": int(hol)}
            else:
                out[fl.name] = {"queued_bits": 0.0, "hol_delay_us": 0}
        return out


def run(scenario: Scenario) -> RunResult:
    return Engine(scenario).run()


TRACE_COLUMNS = ["packet_id", "slice_type", "flow", "created_us",
                 "hop1_delay_us", "rg_wait_us", "delivered_us", "outcome"]


def write_trace(result: RunResult, path: str) -> None:
    """Per-packet trace CSV, sorted by packet id for stable output."""
    rows = sorted(result.records, key=lambda r: r.pid)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for r in rows:
            w.writerow([r.pid, r.slice_type, r.flow, r.created_us,
                        r.hop1_delay_us if r.hop1_delay_us >= 0 else "",
                        r.rg_wait_us if r.rg_wait_us >= 0 else "",
                        r.delivered_us if r.delivered_us >= 0 else "",
                        r.outcome])
