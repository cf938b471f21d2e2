from __future__ import annotations

import csv
import math
from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lvestimate.evaluation import (
    RESULT_COLUMNS,
    ResultRow,
    aggregate,
    export_estimates,
    export_results,
    export_summary,
    mae,
    read_results,
    rmse,
)

T0 = datetime(2012, 1, 1)

voltages = st.floats(0.8, 1.2, allow_nan=False)
pairs = st.lists(st.tuples(voltages, voltages), min_size=1, max_size=60)


def close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-14, abs_tol=0.0)


def test_perfect_prediction():
    y = [0.97, 1.0, 1.03]
    assert rmse(y, y) == 0.0 and mae(y, y) == 0.0


def test_two_point_example():
    assert close(rmse([0.98, 1.02], [1.00, 1.00]), 0.02)
    assert close(mae([0.98, 1.02], [1.00, 1.00]), 0.02)


def test_single_outlier_example():
    assert close(rmse([1, 1, 1, 1], [1.004, 1, 1, 1]), 0.002)
    assert close(mae([1, 1, 1, 1], [1.004, 1, 1, 1]), 0.001)


@pytest.mark.parametrize("metric", [rmse, mae])
def test_metric_errors(metric):
    with pytest.raises(ValueError, match="length mismatch"):
        metric([1.0, 1.0], [1.0])
    with pytest.raises(ValueError, match="no values"):
        metric([], [])


@settings(max_examples=300, deadline=None)
@given(pairs)
def test_rmse_at_least_mae(data):
    y, p = zip(*data)
    assert rmse(y, p) >= mae(y, p) - 1e-15 * max(1.0, mae(y, p))
    assert mae(y, p) >= 0


@settings(max_examples=200, deadline=None)
@given(pairs, st.randoms(use_true_random=False))
def test_metrics_permutation_invariant(data, rnd):
    shuffled = list(data)
    rnd.shuffle(shuffled)
    y, p = zip(*data)
    ys, ps = zip(*shuffled)
    assert math.isclose(rmse(y, p), rmse(ys, ps), rel_tol=1e-12, abs_tol=1e-15)
    assert math.isclose(mae(y, p), mae(ys, ps), rel_tol=1e-12, abs_tol=1e-15)


@settings(max_examples=200, deadline=None)
@given(pairs, st.floats(-10, 10, allow_nan=False))
def test_metrics_scale_linearly(data, k):
    y, p = (np.array(v) for v in zip(*data))
    assert math.isclose(rmse(k * y, k * p), abs(k) * rmse(y, p), rel_tol=1e-9, abs_tol=1e-12)
    assert math.isclose(mae(k * y, k * p), abs(k) * mae(y, p), rel_tol=1e-9, abs_tol=1e-12)


def row(level=5, sampling=1, value=0.002, model="rf", case="base", voltage=208):
    return ResultRow(case, voltage, model, level, sampling, value, value / 2)


def test_aggregate_identical_rows():
    agg = aggregate([row(sampling=s) for s in (1, 2, 3)])
    assert agg.level_means[("base", 208, "rf", 5)] == (0.002, 0.001)


def test_aggregate_arithmetic_mean():
    agg = aggregate([row(sampling=1, value=0.001), row(sampling=2, value=0.002), row(sampling=3, value=0.003)])
    assert agg.level_means[("base", 208, "rf", 5)][0] == pytest.approx(0.002, rel=1e-15)


def test_aggregate_exclusion_filter():
    rows = [row(level=lv, value=v) for lv, v in ((1, 0.5), (2, 0.4), (5, 0.002), (10, 0.001))]
    full = aggregate(rows).grand_means[("base", 208, "rf")][0]
    kept = aggregate(rows, exclude_levels=(1, 2)).grand_means[("base", 208, "rf")][0]
    assert full == pytest.approx((0.5 + 0.4 + 0.002 + 0.001) / 4)
    assert kept == pytest.approx(0.0015)
    unaffected = [r for r in rows if r.level_pct > 2]
    assert aggregate(unaffected, exclude_levels=(1, 2)) == aggregate(unaffected)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.tuples(st.sampled_from([1, 5, 50]), st.integers(1, 3), st.floats(0, 1)), min_size=1, max_size=30),
    st.randoms(use_true_random=False),
)
def test_aggregate_order_invariant(specs, rnd):
    rows = [row(level=lv, sampling=s, value=v) for lv, s, v in specs]
    shuffled = list(rows)
    rnd.shuffle(shuffled)
    assert aggregate(rows) == aggregate(shuffled)


def test_export_empty_results(tmp_path):
    assert export_results([], tmp_path / "r.csv") == 0
    assert (tmp_path / "r.csv").read_text() == ",".join(RESULT_COLUMNS) + "\n"


def test_export_results_counts_and_round_trip(tmp_path):
    rows = [
        row(level=lv, sampling=s, model=m, value=0.001 * lv + 1e-5 * s)
        for lv in range(1, 25) for s in (1, 2, 3) for m in ("rf", "brt", "lr")
    ]
    assert len(rows) == 72 * 3
    assert export_results(rows, tmp_path / "r.csv") == 216
    assert read_results(tmp_path / "r.csv") == rows


def test_export_estimates_five_day_window(tmp_path):
    n = 7 * 96
    stamps = [T0 + timedelta(minutes=15 * k) for k in range(n)]
    actual = np.linspace(0.95, 1.05, n)
    lines = export_estimates(tmp_path / "e.csv", stamps, actual, {"rf": actual, "lr": actual + 0.01},
                             window=slice(0, 5 * 96))
    assert lines == 480
    with open(tmp_path / "e.csv", newline="") as fh:
        data = list(csv.reader(fh))
    assert data[0] == ["timestamp", "actual_pu", "rf_pu", "brt_pu", "lr_pu"]
    assert len(data) == 481
    assert data[1][3] == "" and data[1][0] == T0.isoformat()


def test_export_summary_columns(tmp_path):
    rows = [row(level=lv) for lv in (1, 2, 5)]
    export_summary(aggregate(rows), tmp_path / "s.csv", aggregate(rows, exclude_levels=(1, 2)))
    with open(tmp_path / "s.csv", newline="") as fh:
        data = list(csv.DictReader(fh))
    assert len(data) == 1
    assert float(data[0]["rmse_pu_excl_lowest"]) == 0.002
