"""Load and irradiance time series, 30->15 minute downscaling and PV output."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from lvestimate.feeder import PVSystem

STEPS_PER_DAY = 96
DEFAULT_START = datetime(2012, 1, 1)


class ProfileError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled series; ``values`` is a read-only float array."""

    start: datetime
    step: int
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.step <= 0:
            raise ProfileError("step must be positive")
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ProfileError("values must be a non-empty 1-D sequence")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.start == other.start
            and self.step == other.step
            and np.array_equal(self.values, other.values)
        )

    def timestamps(self) -> list[datetime]:
        return [self.start + timedelta(minutes=self.step * k) for k in range(len(self))]


def interpolate_to_15min(ts: TimeSeries) -> TimeSeries:
    """Downscale a 30-minute series to 15 minutes by linear interpolation.

    Original samples are kept and a midpoint is inserted between each
    consecutive pair, so the output has ``2 * len(ts) - 1`` samples.
    """
    if ts.step != 30:
        raise ProfileError(f"expected a 30-minute series, got step={ts.step}")
    if len(ts) < 2:
        raise ProfileError("need at least two samples to interpolate")
    v = ts.values
    out = np.empty(2 * v.size - 1)
    out[0::2] = v
    out[1::2] = (v[:-1] + v[1:]) / 2.0
    return TimeSeries(ts.start, 15, out)


def pv_ac_power(ghi: TimeSeries, system: PVSystem) -> TimeSeries:
    """AC output (kW) of a PV system under the given irradiance (W/m^2).

    DC power is linear in irradiance up to 1000 W/m^2; AC power is the DC
    power times inverter efficiency, clipped at the inverter rating
    ``rated_dc_kw / dc_ac_ratio``.
    """
    g = ghi.values
    if np.any(g < 0):
        raise ProfileError("irradiance must be non-negative")
    p_dc = system.rated_dc_kw * np.minimum(g / 1000.0, 1.0)
    ac_limit = system.rated_dc_kw / system.dc_ac_ratio
    p_ac = np.minimum(system.inverter_efficiency * p_dc, ac_limit)
    return TimeSeries(ghi.start, ghi.step, p_ac)


# -- CSV --------------------------------------------------------------------------


def load_profiles_csv(path: str | Path) -> dict[str, TimeSeries]:
    """Read a profile CSV: timestamp column then one numeric column per profile."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ProfileError("no data rows")
    header, body = rows[0], [r for r in rows[1:] if r]
    if not body:
        raise ProfileError("no data rows")
    ids = [h.strip() for h in header[1:]]
    if not ids:
        raise ProfileError("no profile columns")
    if len(set(ids)) != len(ids):
        raise ProfileError("duplicate profile ids in header")

    stamps = []
    data = np.empty((len(body), len(ids)))
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ProfileError(f"line {i}: expected {len(header)} cells, got {len(row)}")
        try:
            stamps.append(datetime.fromisoformat(row[0].strip()))
        except ValueError as exc:
            raise ProfileError(f"line {i}: bad timestamp {row[0]!r}") from exc
        try:
            data[i - 2] = [float(c) for c in row[1:]]
        except ValueError as exc:
            raise ProfileError(f"line {i}: non-numeric cell") from exc
    if not np.all(np.isfinite(data)):
        raise ProfileError("non-finite value in profile data")

    if len(stamps) == 1:
        step = 15
    else:
        step_td = stamps[1] - stamps[0]
        step = int(step_td.total_seconds() // 60)
        if step not in (15, 30) or step_td.total_seconds() != step * 60:
            raise ProfileError(f"unsupported step {step_td}; expected 15 or 30 minutes")
        for k in range(1, len(stamps)):
            if stamps[k] - stamps[k - 1] != step_td:
                raise ProfileError(f"mismatched step at row {k + 2}")
    return {pid: TimeSeries(stamps[0], step, data[:, j]) for j, pid in enumerate(ids)}


def save_profiles_csv(profiles: dict[str, TimeSeries], path: str | Path) -> None:
    ids = list(profiles)
    series = [profiles[k] for k in ids]
    first = series[0]
    if any(len(s) != len(first) or s.step != first.step or s.start != first.start for s in series):
        raise ProfileError("profiles must share start, step and length")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", *ids])
        for k, stamp in enumerate(first.timestamps()):
            w.writerow([stamp.isoformat(), *(repr(float(s.values[k])) for s in series)])


# -- synthetic profiles ---------------------------------------------------------


def _bump(hours: np.ndarray, centre: float, width: float) -> np.ndarray:
    # wrap-around gaussian so the daily shape is continuous across midnight
    d = (hours - centre + 12.0) % 24.0 - 12.0
    return np.exp(-0.5 * (d / width) ** 2)


def generate_synthetic_profiles(
    n_residential: int = 5,
    n_commercial: int = 3,
    days: int = 7,
    seed: int = 0,
    noise: float = 0.1,
    start: datetime = DEFAULT_START,
) -> dict[str, TimeSeries]:
    """Seeded daily-periodic profiles at 15-minute resolution.

    Residential shapes peak in the evening with a smaller morning bump,
    commercial shapes peak around midday. ``noise`` is the amplitude of a
    multiplicative uniform perturbation; with ``noise=0`` every series repeats
    exactly every 96 steps. One irradiance series ``ghi_0`` (W/m^2) is added,
    zero between 18:00 and 06:00.

    Returns:
        ``{"res_k": ..., "com_k": ..., "ghi_0": ...}``
    """
    if days < 1:
        raise ProfileError("days must be >= 1")
    rng = np.random.default_rng(seed)
    n = days * STEPS_PER_DAY
    hours = (np.arange(n) % STEPS_PER_DAY) * 0.25
    out: dict[str, TimeSeries] = {}

    def perturb(shape: np.ndarray) -> np.ndarray:
        return shape * (1.0 + noise * rng.uniform(-1.0, 1.0, size=n))

    for k in range(n_residential):
        shift = rng.uniform(-1.0, 1.0)
        base = rng.uniform(0.2, 0.35)
        morning = rng.uniform(0.2, 0.4)
        shape = (
            base
            + morning * _bump(hours, 7.5 + shift, 1.0)
            + (1.0 - base) * _bump(hours, 19.0 + shift, 2.0)
        )
        out[f"res_{k}"] = TimeSeries(start, 15, perturb(shape))
    for k in range(n_commercial):
        shift = rng.uniform(-0.5, 0.5)
        base = rng.uniform(0.25, 0.4)
        shape = base + (1.0 - base) * _bump(hours, 13.0 + shift, 3.0)
        out[f"com_{k}"] = TimeSeries(start, 15, perturb(shape))

    is_day = (hours > 6.0) & (hours < 18.0)
    daylight = np.where(is_day, np.sin(math.pi * (hours - 6.0) / 12.0), 0.0)
    clear_sky = 1000.0 * daylight**1.2
    cloud = 1.0 - noise * rng.uniform(0.0, 1.0, size=n)
    out["ghi_0"] = TimeSeries(start, 15, np.clip(clear_sky * cloud, 0.0, None))
    return out
