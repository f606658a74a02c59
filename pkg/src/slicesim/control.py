"""Slice lifecycle control: dynamic promotion to the emergency type,
demotion when the emergency is resolved, and the mapping of slice types
onto WLAN service classes.

Triggers are schedule-driven simulation events; the anomaly-detection
pipeline that would raise them in a deployment is out of scope.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .model import SliceInstance, SliceState, SliceType


class EventKind(enum.Enum):
    PROMOTE = "promote"
    DEMOTE = "demote"


@dataclass(frozen=True)
class SliceEvent:
    at_us: int
    kind: EventKind
    patient_ref: int  # patient / slice index


@dataclass(frozen=True)
class ActivationProfile:
    """One-shot delay between the trigger and the slice type taking effect."""

    activation_delay_us: int = 50_000

    def __post_init__(self):
        if self.activation_delay_us < 0:
            raise ValueError("activation delay must be non-negative")


class InvalidTransition(Exception):
    pass


def apply_event(slice_: SliceInstance, event: SliceEvent,
                profile: ActivationProfile) -> int:
    """Start a slice type transition; returns the effective time.

    Promote is valid only from regular monitoring, demote only from
    emergency; anything else raises InvalidTransition and leaves the slice
    untouched.  The caller commits the change at the returned time via
    `commit_transition`.
    """
    if event.kind is EventKind.PROMOTE:
        if slice_.current_type is not SliceType.REGULAR_MONITORING \
                or slice_.state is not SliceState.ACTIVE:
            raise InvalidTransition(
                f"slice {slice_.slice_id}: promote from {slice_.current_type.name}")
        slice_.state = SliceState.PROMOTING
    elif event.kind is EventKind.DEMOTE:
        if slice_.current_type is not SliceType.EMERGENCY \
                or slice_.state is not SliceState.ACTIVE:
            raise InvalidTransition(
                f"slice {slice_.slice_id}: demote from {slice_.current_type.name}")
        slice_.state = SliceState.DEMOTING
    else:
        raise InvalidTransition(f"unknown event kind {event.kind}")
    return event.at_us + profile.activation_delay_us


def commit_transition(slice_: SliceInstance) -> None:
    """Make a pending transition effective (type flip + state back to active)."""
    if slice_.state is SliceState.PROMOTING:
        slice_.current_type = SliceType.EMERGENCY
    elif slice_.state is SliceState.DEMOTING:
        slice_.current_type = SliceType.REGULAR_MONITORING
    else:
        raise InvalidTransition(f"slice {slice_.slice_id}: no transition in flight")
    slice_.state = SliceState.ACTIVE


def wlan_class_of(slice_type: SliceType) -> int:
    """WLAN service-class rank; 0 is the highest priority."""
    return {SliceType.EMERGENCY: 0,
            SliceType.REGULAR_MONITORING: 1,
            SliceType.EMBB: 2}[slice_type]
