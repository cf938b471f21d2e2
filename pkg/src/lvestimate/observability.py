"""Random monitored/unmonitored bus partitions and supervised tables.

A monitored bus stands in for a bus with a voltage sensor. Its readings
become training rows; every unmonitored bus becomes test rows whose targets
are kept only for scoring.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from lvestimate.feeder import Feeder
from lvestimate.powerflow import VoltageDataset

DEFAULT_LEVELS = tuple(range(1, 11)) + tuple(range(15, 81, 5))
FEATURES = ("neighbor_voltage_pu", "nominal_voltage", "bus_label", "coord_x", "coord_y", "time_index")


class ObservabilityError(ValueError):
    pass


@dataclass(frozen=True)
class ObservabilityScenario:
    level_pct: int
    sampling_index: int
    seed: int
    monitored: tuple[int, ...]
    unmonitored: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class TrainingSample:
    """Feature matrix ``X`` (n x 6, column order ``FEATURES``) and targets ``y``.

    ``bus`` and ``step`` record which bus and timestep produced each row.
    """

    X: np.ndarray
    y: np.ndarray
    bus: np.ndarray
    step: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def monitored_count(level_pct: float, n_candidates: int) -> int:
    """``max(1, round(level/100 * n))`` with halves rounded up, capped at ``n``."""
    exact = Fraction(level_pct) * n_candidates / 100
    return min(n_candidates, max(1, math.floor(exact + Fraction(1, 2))))


def scenario_seed(master_seed: int, level_pct: int, sampling_index: int) -> int:
    return int(np.random.SeedSequence([master_seed, level_pct, sampling_index]).generate_state(1)[0])


def make_scenarios(
    bus_ids: Iterable[int],
    master_seed: int,
    levels: Sequence[int] = DEFAULT_LEVELS,
    samplings: int = 3,
) -> list[ObservabilityScenario]:
    """Draw ``samplings`` random partitions for every observability level.

    Each (level, sampling) pair owns a seed derived from ``master_seed``;
    monitored buses are chosen uniformly without replacement.
    """
    candidates = sorted(set(int(b) for b in bus_ids))
    if len(candidates) < 2:
        raise ObservabilityError("need at least two candidate buses")
    out = []
    for level in levels:
        k = monitored_count(level, len(candidates))
        for s in range(1, samplings + 1):
            seed = scenario_seed(master_seed, int(level), s)
            rng = np.random.default_rng(seed)
            chosen = set(int(b) for b in rng.choice(candidates, size=k, replace=False))
            monitored = tuple(b for b in candidates if b in chosen)
            unmonitored = tuple(b for b in candidates if b not in chosen)
            out.append(ObservabilityScenario(int(level), s, seed, monitored, unmonitored))
    return out


def write_manifest(scenarios: Sequence[ObservabilityScenario], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level_pct", "sampling_index", "seed", "monitored"])
        for sc in scenarios:
            w.writerow([sc.level_pct, sc.sampling_index, sc.seed, ",".join(map(str, sc.monitored))])


def nearest_sensor(coords: dict[int, tuple[float, float]], bus: int, sensors: Sequence[int]) -> int | None:
    """Closest sensor bus other than ``bus`` itself; ties go to the lowest id."""
    bx, by = coords[bus]
    best, best_d = None, math.inf
    for s in sorted(sensors):
        if s == bus:
            continue
        sx, sy = coords[s]
        d = math.hypot(sx - bx, sy - by)
        if d < best_d:
            best, best_d = s, d
    return best


def build_tables(
    vd: VoltageDataset,
    sc: ObservabilityScenario,
    feeder: Feeder,
    head_fallback: bool = False,
) -> tuple[TrainingSample, TrainingSample]:
    """Assemble training rows (monitored buses) and test rows (unmonitored buses).

    The first feature is the simultaneous reading of the nearest *other*
    monitored bus. With a single monitored bus there is no other sensor, so
    the call fails unless ``head_fallback`` is set, in which case that bus's
    training rows read the feeder-head voltage instead.

    Raises:
        ObservabilityError: if fewer than two buses are monitored (and no
            fallback is allowed) or a scenario bus is missing from ``vd``.
    """
    missing = [b for b in (*sc.monitored, *sc.unmonitored) if b not in vd.bus_ids]
    if missing:
        raise ObservabilityError(f"buses {missing} not in voltage dataset")
    if not sc.monitored:
        raise ObservabilityError("scenario has no monitored buses")
    if len(sc.monitored) < 2 and not head_fallback:
        raise ObservabilityError("need at least two monitored buses for the neighbour feature")

    coords = {b.id: (b.coord_x, b.coord_y) for b in feeder.buses}
    by_id = {b.id: b for b in feeder.buses}
    rows = {b: k for k, b in enumerate(vd.bus_ids)}
    t0 = vd.timestamps[0]
    minutes = np.array([(ts - t0).total_seconds() / 60.0 for ts in vd.timestamps])
    head_row = rows[feeder.source.id]

    def table(buses: Sequence[int], sensors: Sequence[int]) -> TrainingSample:
        T = vd.n_steps
        X = np.empty((len(buses) * T, len(FEATURES)))
        y = np.empty(len(buses) * T)
        bus_col = np.repeat(np.asarray(buses, dtype=np.int64), T)
        step_col = np.tile(np.arange(T), len(buses))
        for i, b in enumerate(buses):
            nb = nearest_sensor(coords, b, sensors)
            src = head_row if nb is None else rows[nb]
            info = by_id[b]
            block = slice(i * T, (i + 1) * T)
            X[block, 0] = vd.voltages[src]
            X[block, 1] = info.nominal_voltage
            X[block, 2] = info.label
            X[block, 3] = info.coord_x
            X[block, 4] = info.coord_y
            X[block, 5] = minutes
            y[block] = vd.voltages[rows[b]]
        return TrainingSample(X, y, bus_col, step_col)

    return table(sc.monitored, sc.monitored), table(sc.unmonitored, sc.monitored)
