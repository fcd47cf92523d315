"""Slot-synchronous simulator for a hybrid slotted-ALOHA / reservation / TDMA
body-area-network MAC with a movable RAT/DAT boundary."""
from .baselines import aloha_throughput_theory, run_pure_slotted_aloha, run_pure_tdma
from .engine import compute_metrics, default_backend, run, simulate
from .model import (ConfigError, FrameConfig, InvariantViolation, MetricsReport, ScenarioConfig,
                    SensorSpec, load_scenario, preset_scenario, save_scenario)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "FrameConfig", "InvariantViolation", "MetricsReport", "ScenarioConfig",
    "SensorSpec", "aloha_throughput_theory", "compute_metrics", "default_backend",
    "load_scenario", "preset_scenario", "run", "run_pure_slotted_aloha", "run_pure_tdma",
    "save_scenario", "simulate",
]
