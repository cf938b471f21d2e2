"""Error metrics, aggregation across samplings/levels and CSV exports."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

RESULT_COLUMNS = ("case", "voltage", "model", "level_pct", "sampling", "rmse_pu", "mae_pu")
ESTIMATE_MODELS = ("rf", "brt", "lr")


def _errors(actual, predicted) -> np.ndarray:
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {p.shape}")
    if a.size == 0:
        raise ValueError("no values to score")
    return a - p


def rmse(actual, predicted) -> float:
    e = _errors(actual, predicted)
    return math.sqrt(float(np.mean(e * e)))


def mae(actual, predicted) -> float:
    return float(np.mean(np.abs(_errors(actual, predicted))))


@dataclass(frozen=True)
class ResultRow:
    case: str
    voltage: int
    model: str
    level_pct: int
    sampling: int
    rmse: float
    mae: float


@dataclass(frozen=True)
class Aggregate:
    """Means keyed by ``(case, voltage, model, level)`` and ``(case, voltage, model)``.

    Values are ``(rmse, mae)`` pairs.
    """

    level_means: dict[tuple[str, int, str, int], tuple[float, float]]
    grand_means: dict[tuple[str, int, str], tuple[float, float]]


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def aggregate(rows: Iterable[ResultRow], exclude_levels: Iterable[int] = ()) -> Aggregate:
    """Average metrics over samplings per level, and over all kept rows.

    Rows whose level is in ``exclude_levels`` are dropped first. Sums use
    ``math.fsum`` so the result does not depend on row order.
    """
    excluded = set(exclude_levels)
    per_level: dict[tuple, list[ResultRow]] = defaultdict(list)
    per_group: dict[tuple, list[ResultRow]] = defaultdict(list)
    for r in rows:
        if r.level_pct in excluded:
            continue
        per_level[(r.case, r.voltage, r.model, r.level_pct)].append(r)
        per_group[(r.case, r.voltage, r.model)].append(r)

    def means(group: list[ResultRow]) -> tuple[float, float]:
        return _mean([r.rmse for r in group]), _mean([r.mae for r in group])

    return Aggregate(
        {k: means(v) for k, v in sorted(per_level.items())},
        {k: means(v) for k, v in sorted(per_group.items())},
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def export_results(rows: Iterable[ResultRow], path: str | Path) -> int:
    """Write the results CSV; returns the number of data lines."""
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in rows:
            w.writerow([r.case, r.voltage, r.model, r.level_pct, r.sampling, _fmt(r.rmse), _fmt(r.mae)])
            n += 1
    return n


def read_results(path: str | Path) -> list[ResultRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            ResultRow(d["case"], int(d["voltage"]), d["model"], int(d["level_pct"]),
                      int(d["sampling"]), float(d["rmse_pu"]), float(d["mae_pu"]))
            for d in csv.DictReader(fh)
        ]


def export_summary(agg: Aggregate, path: str | Path, excluded: Aggregate | None = None) -> None:
    """Grand means per (case, voltage, model), optionally next to a filtered variant."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["case", "voltage", "model", "rmse_pu", "mae_pu"]
        if excluded is not None:
            header += ["rmse_pu_excl_lowest", "mae_pu_excl_lowest"]
        w.writerow(header)
        for key, (r, m) in agg.grand_means.items():
            line = [*key, _fmt(r), _fmt(m)]
            if excluded is not None:
                er, em = excluded.grand_means.get(key, (math.nan, math.nan))
                line += [_fmt(er), _fmt(em)]
            w.writerow(line)


def export_estimates(
    path: str | Path,
    timestamps: Sequence[datetime],
    actual,
    predicted: Mapping[str, np.ndarray],
    window: slice | None = None,
) -> int:
    """Write one bus's actual and estimated series over ``window``.

    Models absent from ``predicted`` leave their column empty. Returns the
    number of data lines.
    """
    window = window or slice(None)
    stamps = list(timestamps)[window]
    actual = np.asarray(actual, dtype=float)[window]
    cols = [np.asarray(predicted[m], dtype=float)[window] if m in predicted else None for m in ESTIMATE_MODELS]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "actual_pu", *(f"{m}_pu" for m in ESTIMATE_MODELS)])
        for k, stamp in enumerate(stamps):
            w.writerow([stamp.isoformat(), f"{actual[k]:.9f}",
                        *("" if c is None else f"{c[k]:.9f}" for c in cols)])
    return len(stamps)
