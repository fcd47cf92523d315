"""Cross-product parameter sweeps and their CSV output."""
from __future__ import annotations

import csv
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .baselines import run_pure_slotted_aloha, run_pure_tdma
from .engine import check_invariants, compute_metrics, simulate
from .model import COUNTER_FIELDS, ConfigError, MetricsReport, ScenarioConfig, preset_scenario

log = logging.getLogger(__name__)

SCHEMES = ("hybrid", "aloha", "tdma")
KEY_COLUMNS = ("scheme", "group", "dat_nominal", "data_length", "arrival_prob", "seed")
METRIC_COLUMNS = ("offered_load_G", "throughput_S", "mean_delay_slots", "mean_delay_s")
COLUMNS = KEY_COLUMNS + METRIC_COLUMNS + COUNTER_FIELDS + ("error",)
MISSING = "NA"


def run_scheme(scenario: ScenarioConfig, scheme: str, check: bool = False) -> MetricsReport:
    if scheme == "hybrid":
        trace = simulate(scenario, "hybrid")
        if check:
            check_invariants(trace, scenario)
        return compute_metrics(trace, scenario.frame, scenario.warmup_slots)
    if scheme == "aloha":
        return run_pure_slotted_aloha(scenario)
    if scheme == "tdma":
        return run_pure_tdma(scenario)
    raise ConfigError(f"unknown scheme {scheme!r}")


@dataclass(frozen=True, order=True)
class Cell:
    scheme: str
    group: str
    dat_nominal: int
    data_length: int
    arrival_prob: float
    seed: int
    sim_slots: int = 100_000
    warmup_slots: int = 0
    allow_off_grid: bool = False

    def scenario(self) -> ScenarioConfig:
        sc = preset_scenario(self.group, self.dat_nominal, self.data_length, self.arrival_prob,
                             self.seed, sim_slots=self.sim_slots,
                             allow_off_grid=self.allow_off_grid)
        return sc.with_(warmup_slots=self.warmup_slots) if self.warmup_slots else sc


def run_cell(cell: Cell) -> dict:
    row = {k: getattr(cell, k) for k in KEY_COLUMNS}
    try:
        report = run_scheme(cell.scenario(), cell.scheme)
    except Exception as exc:  # one bad cell must not sink the sweep
        log.warning("cell %s failed: %s", cell, exc)
        row.update({k: MISSING for k in METRIC_COLUMNS + COUNTER_FIELDS})
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(report.as_row())
    row["error"] = ""
    return row


def build_cells(group, dats, dls, loads, seeds, schemes, **kw) -> list[Cell]:
    grids = {"dat": dats, "dl": dls, "load": loads, "seed": seeds, "scheme": schemes}
    empty = [k for k, v in grids.items() if not v]
    if empty:
        raise ConfigError(f"empty grid: {', '.join(empty)}")
    cells = [Cell(s, group, d, dl, float(p), seed, **kw)
             for s, d, dl, p, seed in itertools.product(schemes, dats, dls, loads, seeds)]
    return sorted(set(cells))


def run_sweep(cells, workers: int = 1) -> list[dict]:
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_cell, cells, chunksize=4))
    else:
        rows = [run_cell(c) for c in cells]
    return sorted(rows, key=lambda r: tuple(r[k] for k in KEY_COLUMNS))


def format_value(v) -> str:
    if v is None:
        return MISSING
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        w.writerow([format_value(row.get(c)) for c in COLUMNS])


def parse_loads(spec: str) -> list[float]:
    """``0.01,0.02`` (list) or ``geom:LO:HI:N`` (geometric grid)."""
    import numpy as np

    spec = spec.strip()
    if spec.startswith("geom:"):
        try:
            lo, hi, n = spec[5:].split(":")
            return [float(x) for x in np.geomspace(float(lo), float(hi), int(n))]
        except ValueError:
            raise ConfigError(f"bad grid spec {spec!r}; expected geom:LO:HI:N") from None
    if not spec:
        return []
    try:
        return [float(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad load list {spec!r}") from None


def parse_seeds(spec: str) -> list[int]:
    """A count ``5`` (seeds 0..4) or an explicit list ``1,2,7``."""
    spec = spec.strip()
    try:
        if "," in spec:
            return [int(x) for x in spec.split(",") if x.strip()]
        return list(range(int(spec)))
    except ValueError:
        raise ConfigError(f"bad seed spec {spec!r}") from None
