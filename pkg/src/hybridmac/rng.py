"""Named random substreams derived from one root seed.

Every mechanism (arrivals, first-attempt slot pick, backoff, channel errors)
gets its own PCG64 stream per station, so switching one mechanism on or off
never shifts the draws seen by another. Both kernels pull doubles from these
same bit generators, which is what makes them bit-identical.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ARRIVAL = 0
PICK = 1
BACKOFF = 2
ERROR = 3


def substream(seed: int, kind: int, station: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(kind, station))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class StationStreams:
    arrival: np.random.Generator
    pick: np.random.Generator
    backoff: np.random.Generator


def station_streams(seed: int, n_stations: int) -> list[StationStreams]:
    return [
        StationStreams(
            substream(seed, ARRIVAL, i), substream(seed, PICK, i), substream(seed, BACKOFF, i)
        )
        for i in range(n_stations)
    ]


def error_stream(seed: int) -> np.random.Generator:
    return substream(seed, ERROR)
