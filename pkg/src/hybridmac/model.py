"""Domain types for the hybrid RAT/DAT/PAT MAC simulator and the sensor-group presets."""
from __future__ import annotations

import configparser
import enum
import io
import os
from dataclasses import dataclass, replace
from typing import Optional

SCHEMA_VERSION = 1

DAT_SWEEP = (27, 25, 23, 20, 15, 10, 5)
DL_SWEEP = (8, 4)
FRAME_LENGTH = 40
PACKET_SIZE_BITS = 10_000
BANDWIDTH_BPS = 4_000_000
RETRANSMISSION_PROB = 0.01
SIM_SLOTS = 100_000
CHANNEL_LABEL = "BPSK 150 MHz"


class ConfigError(ValueError):
    """A scenario or frame configuration violates its invariants."""


class InvariantViolation(RuntimeError):
    """Engine state became inconsistent; always an engine bug."""

    def __init__(self, message: str, slot: Optional[int] = None):
        if slot is not None:
            message = f"slot {slot}: {message}"
        super().__init__(message)
        self.slot = slot


class TrafficClass(str, enum.Enum):
    RANDOM_ACCESS = "random_access"
    PERIODIC = "periodic"


class Group(str, enum.Enum):
    GROUP1 = "group1"
    GROUP2 = "group2"
    GROUP3 = "group3"


class Biosignal(str, enum.Enum):
    ECG = "ECG"
    HEART_SOUND = "HeartSound"
    HEART_RATE = "HeartRate"
    EMG = "EMG"
    RESPIRATORY_RATE = "RespiratoryRate"
    BLOOD_PRESSURE = "BloodPressure"
    BODY_TEMPERATURE = "BodyTemperature"
    SPO2 = "SpO2"
    EEG = "EEG"


# (biosignal, count, info rate kbps, traffic class) per group
SENSOR_ROSTER = {
    Group.GROUP1: [
        (Biosignal.ECG, 5, 15.0, TrafficClass.RANDOM_ACCESS),
        (Biosignal.HEART_SOUND, 2, 120.0, TrafficClass.PERIODIC),
        (Biosignal.HEART_RATE, 1, 0.6, TrafficClass.PERIODIC),
    ],
    Group.GROUP2: [
        (Biosignal.EMG, 2, 600.0, TrafficClass.RANDOM_ACCESS),
        (Biosignal.RESPIRATORY_RATE, 1, 0.8, TrafficClass.RANDOM_ACCESS),
        (Biosignal.BLOOD_PRESSURE, 1, 1.44, TrafficClass.PERIODIC),
        (Biosignal.BODY_TEMPERATURE, 1, 0.08, TrafficClass.PERIODIC),
        (Biosignal.SPO2, 1, 7.2, TrafficClass.PERIODIC),
    ],
    Group.GROUP3: [
        (Biosignal.EEG, 20, 4.2, TrafficClass.RANDOM_ACCESS),
    ],
}

SIGNAL_CLASS = {
    signal: cls for roster in SENSOR_ROSTER.values() for signal, _, _, cls in roster
}

PAT_LEN = {Group.GROUP1: 3, Group.GROUP2: 3, Group.GROUP3: 0}

# arrival-probability grid bounds (lightest, saturated) per group
LOAD_GRID_BOUNDS = {
    Group.GROUP1: (1e-4, 0.5),
    Group.GROUP2: (1e-4, 0.5),
    Group.GROUP3: (2.5e-5, 0.5),
}
LOAD_GRID_POINTS = 20


@dataclass(frozen=True)
class FrameConfig:
    frame_length: int = FRAME_LENGTH
    pat_len: int = 3
    dat_nominal: int = 23
    data_length: int = 8
    retransmission_prob: float = RETRANSMISSION_PROB
    packet_size_bits: int = PACKET_SIZE_BITS
    bandwidth_bps: int = BANDWIDTH_BPS
    packet_error_prob: float = 0.0

    def __post_init__(self):
        if self.pat_len < 0 or self.dat_nominal < 0:
            raise ConfigError("pat_len and dat_nominal must be non-negative")
        if self.rat_nominal < 1:
            raise ConfigError(
                f"frame of {self.frame_length} slots leaves no RAT slot "
                f"(dat={self.dat_nominal}, pat={self.pat_len})"
            )
        if self.data_length < 1:
            raise ConfigError("data_length must be at least 1")
        if not 0.0 < self.retransmission_prob <= 1.0:
            raise ConfigError("retransmission_prob must lie in (0, 1]")
        if not 0.0 <= self.packet_error_prob <= 1.0:
            raise ConfigError("packet_error_prob must lie in [0, 1]")
        if self.packet_size_bits <= 0 or self.bandwidth_bps <= 0:
            raise ConfigError("packet size and bandwidth must be positive")

    @property
    def rat_nominal(self) -> int:
        return self.frame_length - self.dat_nominal - self.pat_len

    @property
    def dap_len(self) -> int:
        return self.data_length - 1

    @property
    def slot_duration(self) -> float:
        """Seconds per slot; 10 kb / 4 Mbps = 2.5 ms."""
        return self.packet_size_bits / self.bandwidth_bps

    @property
    def frame_duration(self) -> float:
        return self.frame_length * self.slot_duration


@dataclass(frozen=True)
class SensorSpec:
    id: str
    traffic_class: TrafficClass
    biosignal: Biosignal
    info_rate_kbps: float
    group: Group

    @property
    def periodic(self) -> bool:
        return self.traffic_class is TrafficClass.PERIODIC


@dataclass(frozen=True)
class ScenarioConfig:
    sensors: tuple
    frame: FrameConfig
    arrival_prob_per_slot: float
    sim_slots: int = SIM_SLOTS
    seed: int = 0
    warmup_slots: int = 0
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(self.sensors))
        ids = [s.id for s in self.sensors]
        if len(set(ids)) != len(ids):
            raise ConfigError("sensor ids must be unique")
        if len(self.periodic_sensors) > self.frame.pat_len:
            raise ConfigError(
                f"{len(self.periodic_sensors)} periodic sensors need more than "
                f"{self.frame.pat_len} PAT slots"
            )
        if not 0.0 <= self.arrival_prob_per_slot <= 1.0:
            raise ConfigError("arrival_prob_per_slot must lie in [0, 1]")
        if self.sim_slots < 1:
            raise ConfigError("sim_slots must be positive")
        if not 0 <= self.warmup_slots < self.sim_slots:
            raise ConfigError("warmup_slots must lie in [0, sim_slots)")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    @property
    def periodic_sensors(self) -> list:
        return [s for s in self.sensors if s.periodic]

    @property
    def random_sensors(self) -> list:
        return [s for s in self.sensors if not s.periodic]

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


def build_roster(group: Group) -> list[SensorSpec]:
    sensors = []
    for signal, count, rate, cls in SENSOR_ROSTER[group]:
        for k in range(1, count + 1):
            sensors.append(SensorSpec(f"{signal.value}-{k}", cls, signal, rate, group))
    return sensors


def preset_scenario(
    group,
    dat_nominal: int,
    data_length: int,
    arrival_prob: float,
    seed: int = 0,
    *,
    sim_slots: int = SIM_SLOTS,
    allow_off_grid: bool = False,
) -> ScenarioConfig:
    """Scenario for one of the three sensor groups at one (DAT, DL, load) point.

    DAT and DL are restricted to the published sweep unless `allow_off_grid`.
    """
    group = Group(group)
    if not allow_off_grid:
        if dat_nominal not in DAT_SWEEP:
            raise ConfigError(f"dat {dat_nominal} not in sweep set {DAT_SWEEP}")
        if data_length not in DL_SWEEP:
            raise ConfigError(f"data length {data_length} not in sweep set {DL_SWEEP}")
    frame = FrameConfig(
        pat_len=PAT_LEN[group], dat_nominal=dat_nominal, data_length=data_length
    )
    return ScenarioConfig(
        sensors=build_roster(group),
        frame=frame,
        arrival_prob_per_slot=arrival_prob,
        sim_slots=sim_slots,
        seed=seed,
        label=f"{group.value} {CHANNEL_LABEL}",
    )


def default_load_grid(group) -> list[float]:
    """Geometric grid of per-slot arrival probabilities, light load to saturation."""
    import numpy as np

    lo, hi = LOAD_GRID_BOUNDS[Group(group)]
    return [float(x) for x in np.geomspace(lo, hi, LOAD_GRID_POINTS)]


# -- scenario files ---------------------------------------------------------
#
# INI layout: [scenario] and [frame] hold scalars, one [sensor <id>] section
# per station in roster order. Floats are written with repr() so they parse
# back to the identical double.

_FRAME_INTS = ("frame_length", "pat_len", "dat_nominal", "data_length",
               "packet_size_bits", "bandwidth_bps")
_FRAME_FLOATS = ("retransmission_prob", "packet_error_prob")


def dumps_scenario(scenario: ScenarioConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp["scenario"] = {
        "schema_version": str(SCHEMA_VERSION),
        "label": scenario.label,
        "arrival_prob_per_slot": repr(scenario.arrival_prob_per_slot),
        "sim_slots": str(scenario.sim_slots),
        "seed": str(scenario.seed),
        "warmup_slots": str(scenario.warmup_slots),
    }
    f = scenario.frame
    cp["frame"] = {k: str(getattr(f, k)) for k in _FRAME_INTS}
    cp["frame"].update({k: repr(getattr(f, k)) for k in _FRAME_FLOATS})
    for s in scenario.sensors:
        cp[f"sensor {s.id}"] = {
            "traffic_class": s.traffic_class.value,
            "biosignal": s.biosignal.value,
            "info_rate_kbps": repr(s.info_rate_kbps),
            "group": s.group.value,
        }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def loads_scenario(text: str, source: str = "<string>") -> ScenarioConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0][0], exc.errors[0][1].strip()
        raise ConfigError(f"{source}, line {lineno}: cannot parse {line!r}") from None
    except configparser.Error as exc:
        where_ = f", line {exc.lineno}" if getattr(exc, "lineno", None) else ""
        raise ConfigError(f"{source}{where_}: {exc.message}") from None

    lines = text.splitlines()

    def where(section, key):
        # configparser drops line numbers once parsed; recover them for diagnostics
        current = None
        for n, line in enumerate(lines, 1):
            stripped = line.strip()
            if stripped.startswith("[") and stripped.endswith("]"):
                current = stripped[1:-1].strip()
            elif current == section and stripped.split("=", 1)[0].strip() == key:
                return f"{source}, line {n}"
        return f"{source}, section [{section}]"

    def get(section, key, conv):
        try:
            raw = cp[section][key]
        except KeyError:
            raise ConfigError(f"{where(section, key)}: missing key {key!r}") from None
        try:
            return conv(raw)
        except ValueError:
            raise ConfigError(f"{where(section, key)}: bad value for {key}: {raw!r}") from None

    if not cp.has_section("scenario") or not cp.has_section("frame"):
        raise ConfigError(f"{source}: needs [scenario] and [frame] sections")
    version = get("scenario", "schema_version", int)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{source}: unsupported schema_version {version}")

    frame_kw = {k: get("frame", k, int) for k in _FRAME_INTS}
    frame_kw.update({k: get("frame", k, float) for k in _FRAME_FLOATS})
    sensors = []
    for name in cp.sections():
        if not name.startswith("sensor "):
            continue
        sid = name[len("sensor "):].strip()
        sensor = SensorSpec(
            id=sid,
            traffic_class=get(name, "traffic_class", TrafficClass),
            biosignal=get(name, "biosignal", Biosignal),
            info_rate_kbps=get(name, "info_rate_kbps", float),
            group=get(name, "group", Group),
        )
        sensors.append(sensor)
    try:
        frame = FrameConfig(**frame_kw)
    except ConfigError as exc:
        raise ConfigError(f"{source}, section [frame]: {exc}") from None
    return ScenarioConfig(
        sensors=sensors,
        frame=frame,
        arrival_prob_per_slot=get("scenario", "arrival_prob_per_slot", float),
        sim_slots=get("scenario", "sim_slots", int),
        seed=get("scenario", "seed", int),
        warmup_slots=get("scenario", "warmup_slots", int),
        label=cp["scenario"].get("label", ""),
    )


def save_scenario(scenario: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_scenario(scenario))


def load_scenario(path) -> ScenarioConfig:
    if not os.path.exists(path):
        raise FileNotFoundError(f"scenario file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return loads_scenario(fh.read(), source=str(path))


@dataclass(frozen=True)
class Message:
    owner: int
    arrival_slot: int
    dap_len: int
    rap_len: int = 1


COUNTER_FIELDS = (
    "arrivals", "rap_attempts", "rap_successes", "collisions", "dap_slots",
    "pap_slots", "lost_slots", "completions", "in_flight", "discarded", "dropped",
    "contention_slots", "measured_slots",
)


@dataclass
class MetricsReport:
    offered_load_G: float
    throughput_S: float
    mean_delay_slots: Optional[float]
    mean_delay_s: Optional[float]
    arrivals: int = 0
    rap_attempts: int = 0
    rap_successes: int = 0
    collisions: int = 0
    dap_slots: int = 0
    pap_slots: int = 0
    lost_slots: int = 0
    completions: int = 0
    in_flight: int = 0
    discarded: int = 0
    dropped: int = 0
    contention_slots: int = 0
    measured_slots: int = 0

    def as_row(self) -> dict:
        row = {
            "offered_load_G": self.offered_load_G,
            "throughput_S": self.throughput_S,
            "mean_delay_slots": self.mean_delay_slots,
            "mean_delay_s": self.mean_delay_s,
        }
        row.update({k: getattr(self, k) for k in COUNTER_FIELDS})
        return row


class OutcomeKind(enum.IntEnum):
    IDLE = 0
    SUCCESS = 1
    COLLISION = 2
    LOST = 3  # single transmitter corrupted by the channel-error knob


class Payload(enum.IntEnum):
    NONE = 0
    RAP = 1
    DAP = 2
    PAP = 3


@dataclass(frozen=True)
class SlotOutcome:
    kind: OutcomeKind
    stations: tuple = ()
    payload: Payload = Payload.NONE

    def __post_init__(self):
        if self.kind is OutcomeKind.COLLISION and len(self.stations) < 2:
            raise InvariantViolation("a collision needs at least two transmitters")
