"""Radio-hop abstraction: per-interval resource grids, clamped-lognormal
spectral-efficiency draws, and block errors at a target BLER.

No propagation or MCS tables are modelled; link adaptation is represented
directly by an efficiency draw whose block error probability equals the
configured target by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import LinkState, ResourceGrid


@dataclass(frozen=True)
class ChannelModel:
    """Clamped lognormal spectral-efficiency distribution (bits/unit)."""

    eff_median: float
    eff_sigma: float = 0.35
    eff_min: float = 0.5
    eff_max: float = 8.0
    coherence_us: int = 100_000  # redraw period

    def __post_init__(self):
        if self.eff_median <= 0 or self.eff_min <= 0 or self.eff_max < self.eff_min:
            raise ValueError("bad spectral efficiency bounds")

    def draw(self, rng: np.random.Generator) -> float:
        raw = rng.lognormal(mean=np.log(self.eff_median), sigma=self.eff_sigma)
        return float(min(max(raw, self.eff_min), self.eff_max))


@dataclass(frozen=True)
class HopConfig:
    grid: ResourceGrid
    channel: ChannelModel
    target_bler: float
    max_retx: int = 8
    access_delay_us: int = 0  # fixed per-packet medium-access delay (WLAN)

    def __post_init__(self):
        if not 0.0 <= self.target_bler < 1.0:
            raise ValueError("target_bler must be in [0, 1)")
        if self.max_retx < 0:
            raise ValueError("max_retx must be non-negative")


def link_adapt(link: LinkState, model: ChannelModel,
               rng: np.random.Generator) -> LinkState:
    """Redraw the link's spectral efficiency from the channel model.

    The target BLER is unchanged: link adaptation picks a rate whose
    per-block error probability equals the target by construction.
    """
    link.spectral_efficiency = model.draw(rng)
    return link


class TransmitOutcome:
    __slots__ = ("bits_served", "success", "lost")

    def __init__(self, bits_served: float, success: bool, lost: bool):
        self.bits_served = bits_served
        self.success = success
        self.lost = lost


def transmit(packet_bits_remaining: float, allocated_units: int,
             link: LinkState, hop_cfg: HopConfig, retx_count: int,
             rng: np.random.Generator) -> TransmitOutcome:
    """One interval's transmission attempt for the head packet of a queue.

    The allocated block fails i.i.d. with the target BLER; a failed block
    consumes its units, serves no bits, and is retried in a later interval.
    Once a packet accumulates more than max_retx failures it is lost.
    """
    if allocated_units <= 0:
        return TransmitOutcome(0.0, False, False)
    if hop_cfg.target_bler > 0.0 and rng.random() < hop_cfg.target_bler:
        lost = retx_count + 1 > hop_cfg.max_retx
        return TransmitOutcome(0.0, False, lost)
    bits = min(packet_bits_remaining, allocated_units * link.spectral_efficiency)
    return TransmitOutcome(bits, True, False)
