"""Reference schemes on the same station population: pure slotted ALOHA and
fixed round-robin TDMA, plus the classical ALOHA throughput curve."""
from __future__ import annotations

import math

from .engine import compute_metrics, simulate
from .model import (Biosignal, ConfigError, FrameConfig, Group, MetricsReport, ScenarioConfig,
                    SensorSpec, TrafficClass)


def aloha_throughput_theory(G: float) -> float:
    """S = G e^-G for slotted ALOHA with Poisson attempts at rate G per slot."""
    if G < 0:
        raise ValueError("offered load must be non-negative")
    return G * math.exp(-G)


def run_pure_slotted_aloha(scenario: ScenarioConfig, backend=None) -> MetricsReport:
    trace = simulate(scenario, "aloha", backend)
    return compute_metrics(trace, scenario.frame, scenario.warmup_slots)


def run_pure_tdma(scenario: ScenarioConfig, backend=None) -> MetricsReport:
    n = len(scenario.sensors)
    if n > scenario.frame.frame_length:
        raise ConfigError(f"{n} stations cannot share a {scenario.frame.frame_length}-slot TDMA frame")
    if n == 0:
        raise ConfigError("TDMA needs at least one station")
    trace = simulate(scenario, "tdma", backend)
    return compute_metrics(trace, scenario.frame, scenario.warmup_slots)


def tdma_slots_per_station(n_stations: int, frame_length: int) -> tuple[int, int]:
    """(owned slots per station, idle remainder slots)."""
    return frame_length // n_stations, frame_length % n_stations


def saturated_aloha_scenario(n_stations: int, retransmission_prob: float, seed: int = 0,
                             sim_slots: int = 100_000, frame_length: int = 40) -> ScenarioConfig:
    """Many always-busy single-slot stations; the regime where attempts are near Poisson."""
    sensors = [
        SensorSpec(f"S{k:03d}", TrafficClass.RANDOM_ACCESS, Biosignal.EEG, 0.0, Group.GROUP3)
        for k in range(n_stations)
    ]
    frame = FrameConfig(frame_length=frame_length, pat_len=0, dat_nominal=0, data_length=1,
                        retransmission_prob=retransmission_prob)
    return ScenarioConfig(sensors=sensors, frame=frame, arrival_prob_per_slot=1.0,
                          sim_slots=sim_slots, seed=seed, label="saturated aloha")


# station counts whose saturated offered load lands near G = 0.5, 1, 2 at q = 0.01
ORACLE_POINTS = {0.5: 26, 1.0: 70, 2.0: 180}
