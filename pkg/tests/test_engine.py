import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridmac import engine
from hybridmac._pykernel import resolve_slot
from hybridmac.model import (FrameConfig, InvariantViolation, OutcomeKind, Payload,
                             preset_scenario)
from hybridmac.scheduler import DAT, PAT, RAT
from hybridmac.stations import TransmitDecision

L = 40


def hand_trace(kinds, outcomes, payloads, n_tx=None, msgs=(), sim_slots=None):
    """Minimal SimTrace for metric oracles; msgs are (arrival, completion, periodic)."""
    T = sim_slots or len(kinds)
    msgs = list(msgs)
    return engine.SimTrace(
        sim_slots=T, frame_length=L,
        slot_kind=np.array(kinds, np.int8), outcome=np.array(outcomes, np.int8),
        payload=np.array(payloads, np.int8), station=np.zeros(T, np.int32),
        n_tx=np.array(n_tx if n_tx is not None else [int(o != 0) for o in outcomes], np.int16),
        tx_slot=np.zeros(0, np.int64), tx_station=np.zeros(0, np.int32),
        frame_rat=np.zeros(0, np.int32), frame_dat=np.zeros(0, np.int32),
        frame_pat=np.zeros(0, np.int32), frame_queue=np.zeros(0, np.int32),
        msg_owner=np.zeros(len(msgs), np.int32),
        msg_arrival=np.array([m[0] for m in msgs], np.int64),
        msg_rap=np.array([m[0] for m in msgs], np.int64),
        msg_completion=np.array([m[1] for m in msgs], np.int64),
        msg_dap_len=np.zeros(len(msgs), np.int32),
        msg_periodic=np.array([m[2] for m in msgs], bool),
        arrivals=len(msgs), discarded=0)


# -- channel resolution ------------------------------------------------------

class Always:
    def __init__(self, u):
        self.u = u

    def random(self):
        return self.u


def test_resolve_idle_success_collision():
    assert resolve_slot({}, RAT, None, 0.0).kind is OutcomeKind.IDLE
    out = resolve_slot({3: TransmitDecision.SEND_RAP}, RAT, None, 0.0)
    assert (out.kind, out.stations, out.payload) == (OutcomeKind.SUCCESS, (3,), Payload.RAP)
    out = resolve_slot({4: TransmitDecision.SEND_RAP, 1: TransmitDecision.SEND_RAP}, RAT, None, 0.0)
    assert (out.kind, out.stations) == (OutcomeKind.COLLISION, (1, 4))


def test_resolve_reserved_collision_is_a_bug():
    with pytest.raises(InvariantViolation, match="slot 17"):
        resolve_slot({1: TransmitDecision.SEND_DAP, 2: TransmitDecision.SEND_DAP}, DAT, None, 0.0, 17)


def test_error_knob_loses_single_transmissions():
    out = resolve_slot({2: TransmitDecision.SEND_PAP}, PAT, Always(0.05), 0.1)
    assert (out.kind, out.payload) == (OutcomeKind.LOST, Payload.PAP)
    assert resolve_slot({2: TransmitDecision.SEND_PAP}, PAT, Always(0.5), 0.1).kind is OutcomeKind.SUCCESS


# -- metric oracles on hand-built traces --------------------------------------

def test_throughput_counts_success_slots():
    # 4 RAP + 4 DAP + 3 PAP successes in one 40-slot frame -> 11/40
    kinds = [RAT] * 30 + [DAT] * 7 + [PAT] * 3
    outcomes = [0] * L
    payloads = [0] * L
    for t in (2, 5, 9, 20):
        outcomes[t], payloads[t] = OutcomeKind.SUCCESS, Payload.RAP
    outcomes[12] = OutcomeKind.COLLISION
    for t in (30, 31, 32, 33):
        outcomes[t], payloads[t] = OutcomeKind.SUCCESS, Payload.DAP
    for t in (37, 38, 39):
        outcomes[t], payloads[t] = OutcomeKind.SUCCESS, Payload.PAP
    n_tx = [int(o == 1) for o in outcomes]
    n_tx[12] = 3
    r = engine.compute_metrics(hand_trace(kinds, outcomes, payloads, n_tx), FrameConfig())
    assert r.throughput_S == pytest.approx(11 / 40)
    assert r.offered_load_G == pytest.approx(7 / 30)
    assert (r.rap_successes, r.dap_slots, r.pap_slots, r.collisions) == (4, 4, 3, 1)


def test_all_pat_successes_give_unit_throughput():
    r = engine.compute_metrics(hand_trace([PAT] * L, [1] * L, [Payload.PAP] * L), FrameConfig())
    assert r.throughput_S == 1.0
    assert r.offered_load_G == 0.0


def test_no_completions_means_undefined_delay():
    r = engine.compute_metrics(hand_trace([RAT] * L, [0] * L, [0] * L, msgs=[(3, -1, False)]),
                               FrameConfig())
    assert r.mean_delay_slots is None and r.mean_delay_s is None
    assert r.in_flight == 1


def test_delay_excludes_periodic_and_warmup():
    msgs = [(1, 11, False), (20, 40, False), (25, 27, True)]
    r = engine.compute_metrics(hand_trace([RAT] * L, [0] * L, [0] * L, msgs=msgs), FrameConfig(), warmup=10)
    assert r.mean_delay_slots == 20
    assert r.mean_delay_s == pytest.approx(20 * 2.5e-3)
    assert r.measured_slots == 30


# -- whole-run behaviour --------------------------------------------------------

def test_pat_only_throughput_is_closed_form(backend):
    sc = preset_scenario("group1", 23, 8, 0.0, 1, sim_slots=4000)
    r = engine.compute_metrics(engine.simulate(sc, backend=backend), sc.frame)
    assert r.throughput_S == 3 / 40
    assert r.offered_load_G == 0.0
    assert r.mean_delay_slots is None


def test_group3_idle_channel(backend):
    sc = preset_scenario("group3", 27, 8, 0.0, 1, sim_slots=4000)
    trace = engine.simulate(sc, backend=backend)
    assert engine.compute_metrics(trace, sc.frame).throughput_S == 0.0
    assert (trace.frame_rat == 40).all()


def test_single_station_message_lifecycle(backend):
    """One ECG sensor, one message: slot-by-slot replay of the frame layout."""
    base = preset_scenario("group1", 23, 8, 0.0, 5, sim_slots=4000)
    ecg = base.random_sensors[0]
    sc = base.with_(sensors=(ecg, *base.periodic_sensors), arrival_prob_per_slot=2e-3)
    trace = engine.simulate(sc, backend=backend)
    engine.check_invariants(trace, sc)
    done = np.flatnonzero(trace.completed)
    assert done.size >= 1
    m = done[0]
    a, rap, c = trace.msg_arrival[m], trace.msg_rap[m], trace.msg_completion[m]
    # RAP lands in the first contention block after arrival, DAP fills the next frame's DAT block
    assert rap // L in (a // L, a // L + 1) and trace.slot_kind[rap] == RAT
    dap = np.flatnonzero((trace.station == 0) & (trace.payload == Payload.DAP))
    dap = dap[(dap > rap) & (dap < c)]
    assert dap.size == 7 and (dap // L == rap // L + 1).all()
    # only reservation in the queue: D = 7, so the DAT block is slots 30..36 of the frame
    assert (dap % L == np.arange(30, 37)).all()
    assert c == dap[-1] + 1
    assert 1 <= c - a <= 2 * L + 8


@pytest.mark.parametrize("group,dat,dl", [("group1", 23, 8), ("group1", 10, 4),
                                          ("group2", 15, 8), ("group3", 27, 8), ("group3", 5, 4)])
def test_single_station_delay_bound(group, dat, dl, backend):
    base = preset_scenario(group, dat, dl, 0.0, 11, sim_slots=40_000)
    sc = base.with_(sensors=(base.random_sensors[0], *base.periodic_sensors),
                    arrival_prob_per_slot=1e-3)
    trace = engine.simulate(sc, backend=backend)
    r = engine.compute_metrics(trace, sc.frame)
    assert r.collisions == 0 and r.completions > 5
    delays = (trace.msg_completion - trace.msg_arrival)[trace.completed]
    assert delays.max() <= 2 * L + dl


@pytest.mark.parametrize("group", ["group1", "group2", "group3"])
def test_invariants_hold_across_loads(group, backend):
    for load in (1e-4, 1e-2, 0.5):
        sc = preset_scenario(group, 15, 8, load, 3, sim_slots=8000)
        engine.check_invariants(engine.simulate(sc, backend=backend), sc)


@settings(max_examples=25, deadline=None)
@given(group=st.sampled_from(["group1", "group2", "group3"]),
       dat=st.sampled_from([27, 25, 23, 20, 15, 10, 5]), dl=st.sampled_from([8, 4]),
       load=st.floats(1e-5, 1.0), seed=st.integers(0, 10**6))
def test_invariants_property(group, dat, dl, load, seed):
    sc = preset_scenario(group, dat, dl, load, seed, sim_slots=2000)
    trace = engine.simulate(sc)
    engine.check_invariants(trace, sc)
    r = engine.compute_metrics(trace, sc.frame)
    assert r.arrivals == r.completions + r.in_flight + r.discarded
    assert 0.0 <= r.throughput_S <= 1.0
    assert (trace.frame_dat <= dat).all()
    assert ((trace.frame_dat == 0) == (trace.frame_queue == 0)).all()


def test_frame_boundary_tracks_demand():
    sc = preset_scenario("group1", 15, 8, 0.2, 4, sim_slots=20_000)
    trace = engine.simulate(sc)
    # the RAT block shrinks exactly as far as queued demand allows
    assert (trace.frame_dat <= 15).all()
    assert set(np.unique(trace.frame_dat)) > {0, 15}
    assert (trace.frame_rat == 40 - 3 - trace.frame_dat).all()


def test_same_seed_same_trace(backend):
    sc = preset_scenario("group2", 20, 4, 0.05, 9, sim_slots=6000)
    assert engine.simulate(sc, backend=backend).equals(engine.simulate(sc, backend=backend))


def test_different_seed_different_trace():
    sc = preset_scenario("group2", 20, 4, 0.05, 9, sim_slots=6000)
    assert not engine.simulate(sc).equals(engine.simulate(sc.with_(seed=10)))


def test_error_knob_reduces_delivery(backend):
    sc = preset_scenario("group1", 23, 8, 0.02, 2, sim_slots=20_000)
    clean = engine.compute_metrics(engine.simulate(sc, backend=backend), sc.frame)
    noisy_sc = sc.with_(frame=FrameConfig(pat_len=3, dat_nominal=23, data_length=8,
                                          packet_error_prob=0.2))
    trace = engine.simulate(noisy_sc, backend=backend)
    engine.check_invariants(trace, noisy_sc)
    noisy = engine.compute_metrics(trace, noisy_sc.frame)
    assert noisy.lost_slots > 0 and clean.lost_slots == 0
    assert noisy.pap_slots == pytest.approx(0.8 * clean.pap_slots, rel=0.05)


def test_warmup_excludes_early_slots():
    sc = preset_scenario("group1", 23, 8, 0.0, 1, sim_slots=4000).with_(warmup_slots=400)
    r = engine.compute_metrics(engine.simulate(sc), sc.frame, sc.warmup_slots)
    assert r.measured_slots == 3600
    assert r.pap_slots == 270
    assert r.arrivals == 0


def test_trace_dump(tmp_path):
    sc = preset_scenario("group1", 23, 8, 0.05, 1, sim_slots=400)
    trace = engine.simulate(sc)
    path = tmp_path / "t.csv"
    engine.write_trace(trace, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# hybridmac trace,schema_version=1")
    assert sum(1 for ln in lines if ln.startswith("slot,")) == 400
    assert sum(1 for ln in lines if ln.startswith("frame,")) == 10


def test_unknown_backend():
    sc = preset_scenario("group1", 23, 8, 0.0, 1, sim_slots=40)
    with pytest.raises(ValueError):
        engine.simulate(sc, backend="fortran")


def test_saturated_single_station_delivers_every_slot(backend):
    base = preset_scenario("group1", 23, 8, 1.0, 2, sim_slots=8000)
    sc = base.with_(sensors=(base.random_sensors[0],))
    trace = engine.simulate(sc, backend=backend)
    r = engine.compute_metrics(trace, sc.frame)
    assert r.collisions == 0
    assert r.in_flight <= 1
    done = np.flatnonzero(trace.completed)
    for m in done[:50]:
        a, c = trace.msg_arrival[m], trace.msg_completion[m]
        delivered = np.count_nonzero((trace.station[a:c] == 0) & (trace.outcome[a:c] == OutcomeKind.SUCCESS))
        assert delivered == 8
