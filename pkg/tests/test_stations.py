import pytest

from conftest import ScriptedStreams
from hybridmac.model import (FrameConfig, InvariantViolation, Message, OutcomeKind,
                             SlotOutcome, preset_scenario)
from hybridmac.scheduler import DAT, PAT, RAT
from hybridmac.stations import (IDLE, Arrival, Backlogged, Draining, SlotRef, TransmitDecision,
                                decide_transmit, generate_arrival, on_feedback)

CFG = FrameConfig(dat_nominal=23, data_length=8)
SC = preset_scenario("group1", 23, 8, 0.5)
ECG = SC.random_sensors[0]
HEART_RATE = SC.periodic_sensors[0]
MSG = Message(owner=0, arrival_slot=3, dap_len=7)


def test_arrival_accepted_when_idle():
    rng = ScriptedStreams(arrival=[0.1], pick=[0.25])
    state, what = generate_arrival(ECG, IDLE, 0.5, rng, 3, 0, CFG)
    assert what is Arrival.ACCEPTED
    assert state == Backlogged(MSG, fresh=True, pick=0.25)


def test_no_arrival_above_probability():
    state, what = generate_arrival(ECG, IDLE, 0.5, ScriptedStreams(arrival=[0.7]), 3, 0, CFG)
    assert (state, what) == (IDLE, Arrival.NONE)


def test_busy_station_discards():
    busy = Draining(MSG, 4)
    state, what = generate_arrival(ECG, busy, 0.5, ScriptedStreams(arrival=[0.0]), 9, 0, CFG)
    assert (state, what) == (busy, Arrival.DISCARDED)


def test_periodic_station_never_draws():
    rng = ScriptedStreams()
    assert generate_arrival(HEART_RATE, IDLE, 1.0, rng, 0, 5, CFG) == (IDLE, Arrival.NONE)


def test_fresh_pick_fixed_at_first_rat_slot():
    state = Backlogged(MSG, pick=0.5)
    # 10 RAT slots left starting at slot 4 -> chooses 4 + 5
    d, state = decide_transmit(state, SlotRef(4, RAT, -1, 10), 0, CFG, ScriptedStreams())
    assert d is TransmitDecision.SILENT and state.chosen_slot == 9
    for t in range(5, 9):
        d, state = decide_transmit(state, SlotRef(t, RAT, -1, 14 - t), 0, CFG, ScriptedStreams())
        assert d is TransmitDecision.SILENT
    d, _ = decide_transmit(state, SlotRef(9, RAT, -1, 5), 0, CFG, ScriptedStreams())
    assert d is TransmitDecision.SEND_RAP


def test_fresh_pick_stays_in_window():
    state = Backlogged(MSG, pick=0.999999)
    _, state = decide_transmit(state, SlotRef(30, RAT, -1, 3), 0, CFG, ScriptedStreams())
    assert state.chosen_slot == 32


def test_stale_station_uses_retransmission_prob():
    stale = Backlogged(MSG, fresh=False)
    d, _ = decide_transmit(stale, SlotRef(0, RAT, -1, 14), 0, CFG, ScriptedStreams(backoff=[0.009]))
    assert d is TransmitDecision.SEND_RAP
    d, _ = decide_transmit(stale, SlotRef(1, RAT, -1, 13), 0, CFG, ScriptedStreams(backoff=[0.011]))
    assert d is TransmitDecision.SILENT


def test_backlogged_silent_outside_rat():
    stale = Backlogged(MSG, fresh=False)
    for kind in (DAT, PAT):
        d, s = decide_transmit(stale, SlotRef(20, kind, 3, 0), 0, CFG, ScriptedStreams())
        assert d is TransmitDecision.SILENT and s is stale


def test_draining_sends_in_own_dat_slots():
    state = Draining(MSG, 2)
    d, state = decide_transmit(state, SlotRef(20, DAT, 0, 0), 0, CFG, ScriptedStreams())
    assert d is TransmitDecision.SEND_DAP and state == Draining(MSG, 1)
    d, state = decide_transmit(state, SlotRef(21, DAT, 1, 0), 0, CFG, ScriptedStreams())
    assert d is TransmitDecision.SILENT
    d, state = decide_transmit(state, SlotRef(22, DAT, 0, 0), 0, CFG, ScriptedStreams())
    assert d is TransmitDecision.SEND_DAP and state is IDLE


def test_periodic_sends_only_in_own_pat_slot():
    d, _ = decide_transmit(IDLE, SlotRef(37, PAT, 5, 0), 5, CFG, ScriptedStreams(), periodic=True)
    assert d is TransmitDecision.SEND_PAP
    d, _ = decide_transmit(IDLE, SlotRef(38, PAT, 6, 0), 5, CFG, ScriptedStreams(), periodic=True)
    assert d is TransmitDecision.SILENT
    d, _ = decide_transmit(IDLE, SlotRef(0, RAT, -1, 37), 5, CFG, ScriptedStreams(), periodic=True)
    assert d is TransmitDecision.SILENT


def test_rap_success_starts_draining():
    ok = SlotOutcome(OutcomeKind.SUCCESS, (0,))
    assert on_feedback(Backlogged(MSG, pick=0.3, chosen_slot=5), ok) == Draining(MSG, 7)


def test_single_slot_message_finishes_on_rap():
    msg = Message(owner=0, arrival_slot=0, dap_len=0)
    assert on_feedback(Backlogged(msg), SlotOutcome(OutcomeKind.SUCCESS, (0,))) is IDLE


@pytest.mark.parametrize("outcome", [SlotOutcome(OutcomeKind.COLLISION, (0, 1)),
                                     SlotOutcome(OutcomeKind.LOST, (0,))])
def test_failed_rap_goes_stale(outcome):
    assert on_feedback(Backlogged(MSG, pick=0.3, chosen_slot=5), outcome) == Backlogged(MSG, fresh=False)


def test_feedback_for_idle_station_is_a_bug():
    with pytest.raises(InvariantViolation):
        on_feedback(IDLE, SlotOutcome(OutcomeKind.SUCCESS, (0,)))
