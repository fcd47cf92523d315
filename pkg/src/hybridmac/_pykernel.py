"""Pure-Python slot loops for the hybrid scheme and the two baselines.

The hybrid loop is a direct composition of the scheduler and station step
functions. Draw order per stream matches ``_ckernel.pyx`` exactly; the parity
tests depend on it.
"""
from __future__ import annotations

from .model import InvariantViolation, OutcomeKind, Payload, SlotOutcome
from .scheduler import DAT, RAT, ReservationQueue, enqueue_reservation, plan_frame
from .stations import (IDLE, Arrival, Draining, SlotRef, TransmitDecision,
                       decide_transmit, generate_arrival, on_feedback)

_PAYLOAD = {
    TransmitDecision.SEND_RAP: Payload.RAP,
    TransmitDecision.SEND_DAP: Payload.DAP,
    TransmitDecision.SEND_PAP: Payload.PAP,
}


class TraceBuilder:
    def __init__(self):
        self.slot_kind = []
        self.outcome = []
        self.payload = []
        self.station = []
        self.n_tx = []
        self.tx_slot = []
        self.tx_station = []
        self.frame_rat = []
        self.frame_dat = []
        self.frame_pat = []
        self.frame_queue = []
        self.msg_owner = []
        self.msg_arrival = []
        self.msg_rap = []
        self.msg_completion = []
        self.msg_dap_len = []
        self.msg_periodic = []
        self.arrivals = 0
        self.discarded = 0

    def new_message(self, owner, slot, dap_len, periodic=False):
        self.msg_owner.append(owner)
        self.msg_arrival.append(slot)
        self.msg_rap.append(-1)
        self.msg_completion.append(-1)
        self.msg_dap_len.append(dap_len)
        self.msg_periodic.append(periodic)
        return len(self.msg_owner) - 1

    def slot(self, t, kind, outcome):
        self.slot_kind.append(kind)
        self.outcome.append(int(outcome.kind))
        self.payload.append(int(outcome.payload))
        single = outcome.kind in (OutcomeKind.SUCCESS, OutcomeKind.LOST)
        self.station.append(outcome.stations[0] if single else -1)
        self.n_tx.append(len(outcome.stations))
        for s in outcome.stations:
            self.tx_slot.append(t)
            self.tx_station.append(s)


def resolve_slot(decisions: dict, slot_kind: int, rng, packet_error_prob: float,
                 slot_index=None) -> SlotOutcome:
    """Channel resolution: 0 transmitters idle, 1 success (or lost), 2+ collide."""
    if not decisions:
        return SlotOutcome(OutcomeKind.IDLE)
    stations = tuple(sorted(decisions))
    if len(stations) > 1:
        if slot_kind != RAT:
            raise InvariantViolation(
                f"{len(stations)} transmitters in a reserved slot: {stations}", slot_index)
        return SlotOutcome(OutcomeKind.COLLISION, stations)
    payload = _PAYLOAD[decisions[stations[0]]]
    if packet_error_prob > 0.0 and rng.random() < packet_error_prob:
        return SlotOutcome(OutcomeKind.LOST, stations, payload)
    return SlotOutcome(OutcomeKind.SUCCESS, stations, payload)


def run_hybrid(scenario, streams, err_rng) -> TraceBuilder:
    cfg = scenario.frame
    L, T = cfg.frame_length, scenario.sim_slots
    p = scenario.arrival_prob_per_slot
    pe = cfg.packet_error_prob
    sensors = scenario.sensors
    periodic = [i for i, s in enumerate(sensors) if s.periodic]
    random_idx = [i for i, s in enumerate(sensors) if not s.periodic]
    is_periodic = [s.periodic for s in sensors]

    tb = TraceBuilder()
    states = [IDLE] * len(sensors)
    msg_of = [-1] * len(sensors)
    queue = ReservationQueue()

    for f in range((T + L - 1) // L):
        tb.frame_queue.append(len(queue))
        plan, queue = plan_frame(cfg, queue, f, periodic)
        R = plan.rat_len
        tb.frame_rat.append(R)
        tb.frame_dat.append(plan.dat_len)
        tb.frame_pat.append(plan.pat_len)
        for x, slot in enumerate(plan.slots):
            t = f * L + x
            if t >= T:
                break
            for i in random_idx:
                states[i], ev = generate_arrival(sensors[i], states[i], p, streams[i], t, i, cfg)
                if ev is Arrival.NONE:
                    continue
                tb.arrivals += 1
                if ev is Arrival.ACCEPTED:
                    msg_of[i] = tb.new_message(i, t, cfg.dap_len)
                else:
                    tb.discarded += 1

            ref = SlotRef(t, slot.kind, slot.owner, R - x if x < R else 0)
            decisions = {}
            for i, state in enumerate(states):
                decision, states[i] = decide_transmit(state, ref, i, cfg, streams[i], is_periodic[i])
                if decision:
                    decisions[i] = decision
                    if decision is TransmitDecision.SEND_DAP and states[i] is IDLE:
                        tb.msg_completion[msg_of[i]] = t + 1
            if slot.kind == DAT and slot.owner not in decisions:
                raise InvariantViolation(f"DAT slot granted to idle station {slot.owner}", t)

            outcome = resolve_slot(decisions, slot.kind, err_rng, pe, t)
            tb.slot(t, slot.kind, outcome)
            if slot.kind != RAT:
                continue
            for i in decisions:
                states[i] = on_feedback(states[i], outcome)
                if outcome.kind is not OutcomeKind.SUCCESS:
                    continue
                m = msg_of[i]
                tb.msg_rap[m] = t
                if isinstance(states[i], Draining):
                    queue = enqueue_reservation(queue, i, tb.msg_dap_len[m])
                else:
                    tb.msg_completion[m] = t + 1
    return tb


def run_aloha(scenario, streams, err_rng) -> TraceBuilder:
    """Every slot contends. Each slot of a message is a separate contention
    packet: first try at a uniform slot in the rest of the frame-equivalent
    period, then persistence after a collision."""
    cfg = scenario.frame
    L, T = cfg.frame_length, scenario.sim_slots
    p, q, pe = scenario.arrival_prob_per_slot, cfg.retransmission_prob, cfg.packet_error_prob
    sensors = scenario.sensors
    n = len(sensors)
    tb = TraceBuilder()

    busy = [False] * n
    fresh = [False] * n
    pick = [0.0] * n
    chosen = [-1] * n
    sent = [0] * n
    need = [1 if s.periodic else cfg.data_length for s in sensors]
    msg_of = [-1] * n

    for t in range(T):
        x = t % L
        if x == 0:
            tb.frame_rat.append(min(L, T - t))
            tb.frame_dat.append(0)
            tb.frame_pat.append(0)
            tb.frame_queue.append(0)
        for i, s in enumerate(sensors):
            if s.periodic:
                arrived = x == 0
            else:
                arrived = streams[i].arrival.random() < p
            if not arrived:
                continue
            tb.arrivals += 1
            if busy[i]:
                tb.discarded += 1
                continue
            busy[i], fresh[i], chosen[i], sent[i] = True, True, -1, 0
            pick[i] = streams[i].pick.random()
            msg_of[i] = tb.new_message(i, t, need[i] - 1, s.periodic)

        tx = []
        for i in range(n):
            if not busy[i]:
                continue
            if fresh[i]:
                if chosen[i] < 0:
                    chosen[i] = t + min(int(pick[i] * L), L - 1)
                if chosen[i] == t:
                    tx.append(i)
            elif streams[i].backoff.random() < q:
                tx.append(i)

        if not tx:
            outcome = SlotOutcome(OutcomeKind.IDLE)
        elif len(tx) > 1:
            outcome = SlotOutcome(OutcomeKind.COLLISION, tuple(tx))
        else:
            i = tx[0]
            if sensors[i].periodic:
                payload = Payload.PAP
            else:
                payload = Payload.RAP if sent[i] == 0 else Payload.DAP
            kind = OutcomeKind.SUCCESS
            if pe > 0.0 and err_rng.random() < pe:
                kind = OutcomeKind.LOST
            outcome = SlotOutcome(kind, (i,), payload)
        tb.slot(t, RAT, outcome)

        if outcome.kind is OutcomeKind.SUCCESS:
            i = tx[0]
            m = msg_of[i]
            if sent[i] == 0:
                tb.msg_rap[m] = t
            sent[i] += 1
            if sent[i] == need[i]:
                busy[i] = False
                tb.msg_completion[m] = t + 1
            else:
                fresh[i], chosen[i] = True, -1
                pick[i] = streams[i].pick.random()
        else:
            for i in tx:
                fresh[i], chosen[i] = False, -1
    return tb


def run_tdma(scenario, streams, err_rng) -> TraceBuilder:
    """Fixed round robin: station k owns a contiguous block of L // n slots."""
    cfg = scenario.frame
    L, T = cfg.frame_length, scenario.sim_slots
    p, pe = scenario.arrival_prob_per_slot, cfg.packet_error_prob
    sensors = scenario.sensors
    n = len(sensors)
    block = L // n
    tb = TraceBuilder()

    busy = [False] * n
    sent = [0] * n
    need = [1 if s.periodic else cfg.data_length for s in sensors]
    msg_of = [-1] * n

    for t in range(T):
        x = t % L
        if x == 0:
            tb.frame_rat.append(0)
            tb.frame_dat.append(min(L, T - t))
            tb.frame_pat.append(0)
            tb.frame_queue.append(0)
        for i, s in enumerate(sensors):
            if s.periodic:
                arrived = x == 0
            else:
                arrived = streams[i].arrival.random() < p
            if not arrived:
                continue
            tb.arrivals += 1
            if busy[i]:
                tb.discarded += 1
                continue
            busy[i], sent[i] = True, 0
            msg_of[i] = tb.new_message(i, t, need[i] - 1, s.periodic)

        owner = x // block
        if owner >= n or not busy[owner]:
            tb.slot(t, DAT, SlotOutcome(OutcomeKind.IDLE))
            continue
        i = owner
        if sensors[i].periodic:
            payload = Payload.PAP
        else:
            payload = Payload.RAP if sent[i] == 0 else Payload.DAP
        kind = OutcomeKind.SUCCESS
        if pe > 0.0 and err_rng.random() < pe:
            kind = OutcomeKind.LOST
        tb.slot(t, DAT, SlotOutcome(kind, (i,), payload))
        m = msg_of[i]
        if sent[i] == 0:
            tb.msg_rap[m] = t
        sent[i] += 1
        if sent[i] == need[i]:
            busy[i] = False
            tb.msg_completion[m] = t + 1
    return tb


KERNELS = {"hybrid": run_hybrid, "aloha": run_aloha, "tdma": run_tdma}
