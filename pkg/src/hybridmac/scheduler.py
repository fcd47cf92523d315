"""Per-frame slot plans and the cross-frame DAT reservation queue."""
from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass

from .model import FrameConfig, InvariantViolation

RAT, DAT, PAT = 0, 1, 2
KIND_NAMES = ("RAT", "DAT", "PAT")

Slot = namedtuple("Slot", "kind owner")
Reservation = namedtuple("Reservation", "station dap_remaining")


@dataclass(frozen=True)
class ReservationQueue:
    """FIFO of outstanding DAP demand, ordered by RAP success."""

    entries: tuple = ()

    def __post_init__(self):
        stations = [e.station for e in self.entries]
        if len(set(stations)) != len(stations):
            raise InvariantViolation(f"station queued twice: {stations}")
        if any(e.dap_remaining < 1 for e in self.entries):
            raise InvariantViolation(f"empty reservation in queue: {self.entries}")

    @property
    def demand(self) -> int:
        return sum(e.dap_remaining for e in self.entries)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, station):
        return any(e.station == station for e in self.entries)


@dataclass(frozen=True)
class SlotPlan:
    frame_index: int
    slots: tuple

    def count(self, kind: int) -> int:
        return sum(1 for s in self.slots if s.kind == kind)

    @property
    def rat_len(self) -> int:
        return self.count(RAT)

    @property
    def dat_len(self) -> int:
        return self.count(DAT)

    @property
    def pat_len(self) -> int:
        return self.count(PAT)


def enqueue_reservation(queue: ReservationQueue, station: int, dap_len: int) -> ReservationQueue:
    if station in queue:
        raise InvariantViolation(f"station {station} already holds a reservation")
    if dap_len < 0:
        raise InvariantViolation(f"negative DAP length {dap_len}")
    if dap_len == 0:
        return queue
    return ReservationQueue(queue.entries + (Reservation(station, dap_len),))


def plan_frame(config: FrameConfig, queue: ReservationQueue, frame_index: int,
               periodic_owners=()) -> tuple[SlotPlan, ReservationQueue]:
    """Lay out one frame as [RAT | DAT | PAT] and consume the DAT grants from `queue`.

    The DAT block shrinks to the queued demand when that is below nominal; the
    freed slots join the RAT block. `periodic_owners` lists periodic station
    indices in id order; PAT slots beyond that list have no owner.
    """
    dat_len = min(config.dat_nominal, queue.demand)
    rat_len = config.frame_length - dat_len - config.pat_len

    slots = [Slot(RAT, -1)] * rat_len
    remaining = list(queue.entries)
    budget = dat_len
    while budget:
        head = remaining[0]
        take = min(budget, head.dap_remaining)
        slots.extend([Slot(DAT, head.station)] * take)
        budget -= take
        if take == head.dap_remaining:
            remaining.pop(0)
        else:
            remaining[0] = head._replace(dap_remaining=head.dap_remaining - take)

    owners = list(periodic_owners)
    for k in range(config.pat_len):
        slots.append(Slot(PAT, owners[k] if k < len(owners) else -1))
    return SlotPlan(frame_index, tuple(slots)), ReservationQueue(tuple(remaining))
