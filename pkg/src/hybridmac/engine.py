"""Slot-synchronous simulation driver, trace container and metrics.

The slot loops live in ``_ckernel`` (compiled) with ``_pykernel`` as the
pure-Python fallback. The compiled core is used when importable unless the
environment variable ``HYBRIDMAC_BACKEND=python`` is set.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from . import _pykernel
from ._pykernel import resolve_slot  # noqa: F401  (public channel rule)
from .model import InvariantViolation, MetricsReport, OutcomeKind, Payload, ScenarioConfig
from .rng import error_stream, station_streams
from .scheduler import DAT, KIND_NAMES, PAT, RAT

try:
    from . import _ckernel
except ImportError:  # pragma: no cover - exercised only without a compiler
    _ckernel = None

TRACE_SCHEMA_VERSION = 1


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _ckernel is not None else [])


def default_backend() -> str:
    wanted = os.environ.get("HYBRIDMAC_BACKEND", "").lower()
    if wanted == "python" or _ckernel is None:
        return "python"
    return "cython"


def _kernel(scheme: str, backend: str | None):
    backend = backend or default_backend()
    if backend == "cython":
        if _ckernel is None:
            raise RuntimeError("compiled kernel not built; reinstall with a C compiler")
        return getattr(_ckernel, f"run_{scheme}")
    if backend == "python":
        return _pykernel.KERNELS[scheme]
    raise ValueError(f"unknown backend {backend!r}")


@dataclass
class SimTrace:
    """Per-slot, per-frame and per-message records of one run.

    Transmitter sets are stored flat: ``tx_slot[k]`` / ``tx_station[k]`` list
    every (slot, station) transmission in slot order.
    """

    sim_slots: int
    frame_length: int
    slot_kind: np.ndarray
    outcome: np.ndarray
    payload: np.ndarray
    station: np.ndarray
    n_tx: np.ndarray
    tx_slot: np.ndarray
    tx_station: np.ndarray
    frame_rat: np.ndarray
    frame_dat: np.ndarray
    frame_pat: np.ndarray
    frame_queue: np.ndarray
    msg_owner: np.ndarray
    msg_arrival: np.ndarray
    msg_rap: np.ndarray
    msg_completion: np.ndarray
    msg_dap_len: np.ndarray
    msg_periodic: np.ndarray
    arrivals: int
    discarded: int
    station_ids: tuple = ()

    @classmethod
    def from_raw(cls, raw, scenario: ScenarioConfig) -> "SimTrace":
        return cls(
            sim_slots=scenario.sim_slots,
            frame_length=scenario.frame.frame_length,
            slot_kind=np.asarray(raw.slot_kind, np.int8),
            outcome=np.asarray(raw.outcome, np.int8),
            payload=np.asarray(raw.payload, np.int8),
            station=np.asarray(raw.station, np.int32),
            n_tx=np.asarray(raw.n_tx, np.int16),
            tx_slot=np.asarray(raw.tx_slot, np.int64),
            tx_station=np.asarray(raw.tx_station, np.int32),
            frame_rat=np.asarray(raw.frame_rat, np.int32),
            frame_dat=np.asarray(raw.frame_dat, np.int32),
            frame_pat=np.asarray(raw.frame_pat, np.int32),
            frame_queue=np.asarray(raw.frame_queue, np.int32),
            msg_owner=np.asarray(raw.msg_owner, np.int32),
            msg_arrival=np.asarray(raw.msg_arrival, np.int64),
            msg_rap=np.asarray(raw.msg_rap, np.int64),
            msg_completion=np.asarray(raw.msg_completion, np.int64),
            msg_dap_len=np.asarray(raw.msg_dap_len, np.int32),
            msg_periodic=np.asarray(raw.msg_periodic, bool),
            arrivals=int(raw.arrivals),
            discarded=int(raw.discarded),
            station_ids=tuple(s.id for s in scenario.sensors),
        )

    @property
    def completed(self) -> np.ndarray:
        return self.msg_completion >= 0

    def transmitters(self, slot: int) -> tuple:
        lo, hi = np.searchsorted(self.tx_slot, [slot, slot + 1])
        return tuple(int(s) for s in self.tx_station[lo:hi])

    def array_fields(self):
        return {k: v for k, v in vars(self).items() if isinstance(v, np.ndarray)}

    def equals(self, other: "SimTrace") -> bool:
        mine, theirs = self.array_fields(), other.array_fields()
        if mine.keys() != theirs.keys():
            return False
        if (self.arrivals, self.discarded, self.sim_slots) != (
                other.arrivals, other.discarded, other.sim_slots):
            return False
        return all(np.array_equal(mine[k], theirs[k]) for k in mine)


def simulate(scenario: ScenarioConfig, scheme: str = "hybrid", backend: str | None = None) -> SimTrace:
    n = len(scenario.sensors)
    streams = station_streams(scenario.seed, n)
    raw = _kernel(scheme, backend)(scenario, streams, error_stream(scenario.seed))
    return SimTrace.from_raw(raw, scenario)


def run(scenario: ScenarioConfig, backend: str | None = None) -> tuple[MetricsReport, SimTrace]:
    """Simulate the hybrid scheme for ``scenario.sim_slots`` slots."""
    trace = simulate(scenario, "hybrid", backend)
    return compute_metrics(trace, scenario.frame, scenario.warmup_slots), trace


def compute_metrics(trace: SimTrace, config, warmup: int = 0) -> MetricsReport:
    """Throughput, offered load and delay over slots/messages from ``warmup`` on.

    Delay covers completed random-access messages only; periodic traffic in the
    baselines is excluded so all schemes report the same quantity. Counters
    cover the whole horizon so the accounting identities hold exactly.
    """
    sl = slice(warmup, None)
    measured = trace.sim_slots - warmup
    out = trace.outcome[sl]
    kind = trace.slot_kind[sl]
    payload = trace.payload[sl]

    delivered = int(np.count_nonzero(out == OutcomeKind.SUCCESS))
    contention = kind == RAT
    contention_slots = int(np.count_nonzero(contention))
    attempts = int(trace.n_tx[sl][contention].sum())
    G = attempts / contention_slots if contention_slots else 0.0

    done = trace.completed & ~trace.msg_periodic & (trace.msg_arrival >= warmup)
    if done.any():
        delays = trace.msg_completion[done] - trace.msg_arrival[done]
        mean_delay = float(delays.mean())
        mean_delay_s = mean_delay * config.slot_duration
    else:
        mean_delay = mean_delay_s = None

    success = out == OutcomeKind.SUCCESS
    completions = int(np.count_nonzero(trace.completed))
    return MetricsReport(
        offered_load_G=G,
        throughput_S=delivered / measured,
        mean_delay_slots=mean_delay,
        mean_delay_s=mean_delay_s,
        arrivals=trace.arrivals,
        rap_attempts=attempts,
        rap_successes=int(np.count_nonzero(success & (payload == Payload.RAP))),
        collisions=int(np.count_nonzero(out == OutcomeKind.COLLISION)),
        dap_slots=int(np.count_nonzero(success & (payload == Payload.DAP))),
        pap_slots=int(np.count_nonzero(success & (payload == Payload.PAP))),
        lost_slots=int(np.count_nonzero(out == OutcomeKind.LOST)),
        completions=completions,
        in_flight=len(trace.msg_owner) - completions,
        discarded=trace.discarded,
        dropped=0,
        contention_slots=contention_slots,
        measured_slots=measured,
    )


def check_invariants(trace: SimTrace, scenario: ScenarioConfig) -> None:
    """Raise InvariantViolation on the first broken identity of a hybrid-scheme trace."""
    cfg = scenario.frame
    L = cfg.frame_length
    T = trace.sim_slots
    n_frames = len(trace.frame_rat)
    full = n_frames if T % L == 0 else n_frames - 1

    sums = trace.frame_rat + trace.frame_dat + trace.frame_pat
    bad = np.flatnonzero(sums[:full] != L)
    if bad.size:
        raise InvariantViolation(f"frame {bad[0]} partition sums to {sums[bad[0]]}", int(bad[0]) * L)

    reserved_collision = (trace.outcome == OutcomeKind.COLLISION) & (trace.slot_kind != RAT)
    if reserved_collision.any():
        raise InvariantViolation("collision in a reserved slot", int(np.argmax(reserved_collision)))
    multi = (trace.n_tx >= 2) != (trace.outcome == OutcomeKind.COLLISION)
    if multi.any():
        raise InvariantViolation("collision flag disagrees with transmitter count", int(np.argmax(multi)))

    # each periodic station: one PAT delivery per complete frame
    if cfg.packet_error_prob == 0.0:
        periodic = [i for i, s in enumerate(scenario.sensors) if s.periodic]
        pat = (trace.slot_kind == PAT) & (trace.outcome == OutcomeKind.SUCCESS)
        frame_of = np.arange(T) // L
        for i in periodic:
            per_frame = np.bincount(frame_of[pat & (trace.station == i)], minlength=n_frames)
            if (per_frame[:full] != 1).any():
                f = int(np.flatnonzero(per_frame[:full] != 1)[0])
                raise InvariantViolation(f"periodic station {i} sent {per_frame[f]} PAPs in frame {f}", f * L)

    # DAP conservation: slots granted == demand of RAP successes minus what is still owed
    dap_tx = (trace.slot_kind == DAT) & (trace.n_tx == 1)
    rap_done = trace.msg_rap >= 0
    owed = int(trace.msg_dap_len[rap_done].sum())
    slots = np.arange(T)
    outstanding = 0
    for m in np.flatnonzero(rap_done & ~trace.completed):
        sent = np.count_nonzero(dap_tx & (trace.station == trace.msg_owner[m]) & (slots > trace.msg_rap[m]))
        outstanding += int(trace.msg_dap_len[m]) - int(sent)
    granted = int(np.count_nonzero(dap_tx))
    if granted != owed - outstanding:
        raise InvariantViolation(f"DAP conservation: {granted} slots granted, {owed - outstanding} owed")

    accepted = len(trace.msg_owner)
    if trace.arrivals != accepted + trace.discarded:
        raise InvariantViolation("arrivals != completions + in-flight + discarded")

    done = trace.completed
    if (trace.msg_completion[done] < trace.msg_rap[done]).any() or \
            (trace.msg_rap[rap_done] < trace.msg_arrival[rap_done]).any():
        raise InvariantViolation("message timestamps out of order")


# -- trace dump -------------------------------------------------------------

def write_trace(trace: SimTrace, path) -> None:
    """Delimited dump with ``slot``, ``frame`` and ``message`` record rows, each block
    preceded by its own header row."""
    outcome_names = {k.value: k.name.lower() for k in OutcomeKind}
    payload_names = {k.value: k.name.lower() for k in Payload}
    ids = trace.station_ids
    name = (lambda i: ids[i] if 0 <= i < len(ids) else "")
    starts = np.searchsorted(trace.tx_slot, np.arange(trace.sim_slots + 1))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["# hybridmac trace", f"schema_version={TRACE_SCHEMA_VERSION}"])
        w.writerow(["record", "slot", "frame", "slot_kind", "outcome", "payload", "transmitters"])
        L = trace.frame_length
        for t in range(trace.sim_slots):
            tx = trace.tx_station[starts[t]:starts[t + 1]]
            w.writerow(["slot", t, t // L, KIND_NAMES[trace.slot_kind[t]],
                        outcome_names[int(trace.outcome[t])], payload_names[int(trace.payload[t])],
                        ";".join(name(int(s)) for s in tx)])
        w.writerow(["record", "frame", "rat", "dat", "pat", "queue_depth"])
        for f in range(len(trace.frame_rat)):
            w.writerow(["frame", f, int(trace.frame_rat[f]), int(trace.frame_dat[f]),
                        int(trace.frame_pat[f]), int(trace.frame_queue[f])])
        w.writerow(["record", "owner", "arrival_slot", "rap_success_slot", "completion_slot"])
        for m in range(len(trace.msg_owner)):
            w.writerow(["message", name(int(trace.msg_owner[m])), int(trace.msg_arrival[m]),
                        int(trace.msg_rap[m]), int(trace.msg_completion[m])])
