"""Station traffic generation and the per-station MAC state machine.

These are the step functions the pure-Python engine is built from; the
compiled kernel replays the same transitions on flat arrays.
"""
from __future__ import annotations

import enum
from collections import namedtuple
from dataclasses import dataclass, replace
from typing import Optional

from .model import (FrameConfig, InvariantViolation, Message, OutcomeKind, SensorSpec,
                    SlotOutcome)
from .scheduler import DAT, PAT, RAT


class TransmitDecision(enum.IntEnum):
    SILENT = 0
    SEND_RAP = 1
    SEND_DAP = 2
    SEND_PAP = 3


class Arrival(enum.IntEnum):
    NONE = 0
    ACCEPTED = 1
    DISCARDED = 2


# index: absolute slot; rat_remaining: RAT slots left in this frame, this one included
SlotRef = namedtuple("SlotRef", "index kind owner rat_remaining")


@dataclass(frozen=True)
class Idle:
    pass


@dataclass(frozen=True)
class Backlogged:
    message: Message
    fresh: bool = True
    pick: float = 0.0
    chosen_slot: Optional[int] = None


@dataclass(frozen=True)
class Draining:
    message: Message
    dap_remaining: int

    def __post_init__(self):
        if self.dap_remaining < 1:
            raise InvariantViolation("draining station with nothing left to send")


IDLE = Idle()


def generate_arrival(spec: SensorSpec, state, arrival_prob: float, rng, slot: int,
                     station: int, config: FrameConfig):
    """One Bernoulli arrival trial for a random-access station.

    Returns ``(state, Arrival)``. A busy station keeps its message and the new
    one is discarded. The arrival draw happens every slot, busy or not.
    """
    if spec.periodic:
        return state, Arrival.NONE
    if not rng.arrival.random() < arrival_prob:
        return state, Arrival.NONE
    if not isinstance(state, Idle):
        return state, Arrival.DISCARDED
    message = Message(owner=station, arrival_slot=slot, dap_len=config.dap_len)
    return Backlogged(message, fresh=True, pick=rng.pick.random()), Arrival.ACCEPTED


def decide_transmit(state, slot: SlotRef, station: int, config: FrameConfig, rng,
                    periodic: bool = False):
    if periodic:
        if not isinstance(state, Idle):
            raise InvariantViolation(f"periodic station {station} left Idle", slot.index)
        if slot.kind == PAT and slot.owner == station:
            return TransmitDecision.SEND_PAP, state
        return TransmitDecision.SILENT, state

    if isinstance(state, Backlogged) and slot.kind == RAT:
        if state.fresh:
            chosen = state.chosen_slot
            if chosen is None:
                # first RAT slot seen since arrival fixes the attempt slot
                offset = min(int(state.pick * slot.rat_remaining), slot.rat_remaining - 1)
                chosen = slot.index + offset
                state = replace(state, chosen_slot=chosen)
            if chosen == slot.index:
                return TransmitDecision.SEND_RAP, state
            return TransmitDecision.SILENT, state
        if rng.backoff.random() < config.retransmission_prob:
            return TransmitDecision.SEND_RAP, state
        return TransmitDecision.SILENT, state

    if isinstance(state, Draining) and slot.kind == DAT and slot.owner == station:
        if state.dap_remaining == 1:
            return TransmitDecision.SEND_DAP, IDLE
        return TransmitDecision.SEND_DAP, replace(state, dap_remaining=state.dap_remaining - 1)

    return TransmitDecision.SILENT, state


def on_feedback(state, outcome: SlotOutcome):
    """Apply the result of this station's RAP attempt."""
    if not isinstance(state, Backlogged):
        raise InvariantViolation(f"RAP feedback for a station in {state!r}")
    if outcome.kind is OutcomeKind.SUCCESS:
        if state.message.dap_len > 0:
            return Draining(state.message, state.message.dap_len)
        return IDLE
    return Backlogged(state.message, fresh=False)
