"""End-to-end experiment: ground truth, observability sweep, training, scoring."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from lvestimate.evaluation import (
    ResultRow,
    aggregate,
    export_estimates,
    export_results,
    export_summary,
    mae,
    rmse,
)
from lvestimate.feeder import Feeder, FeederSpec, generate_synthetic_feeder, load_feeder, save_feeder
from lvestimate.learn import ForestConfig, fit_forest, fit_ols
from lvestimate.observability import (
    DEFAULT_LEVELS,
    ObservabilityScenario,
    build_tables,
    make_scenarios,
    write_manifest,
)
from lvestimate.powerflow import VoltageDataset, run_qsts
from lvestimate.profiles import (
    STEPS_PER_DAY,
    TimeSeries,
    generate_synthetic_profiles,
    interpolate_to_15min,
    load_profiles_csv,
)

log = logging.getLogger(__name__)

CASES = ("base", "pv")
MODELS = ("rf", "brt", "lr")
VOLTAGES = (208, 480)


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    pass


@dataclass
class RunConfig:
    """Experiment matrix and inputs.

    ``feeder`` and ``profiles`` are either a file path or a dict of generator
    parameters (see ``FeederSpec`` and ``generate_synthetic_profiles``).
    """

    feeder: str | dict[str, Any] = field(default_factory=lambda: {"n_buses": 50})
    profiles: str | dict[str, Any] = field(default_factory=dict)
    days: int = 7
    cases: tuple[str, ...] = CASES
    voltage_levels: tuple[int, ...] = VOLTAGES
    levels: tuple[int, ...] = DEFAULT_LEVELS
    samplings: int = 3
    models: tuple[str, ...] = MODELS
    trees: int = 100
    master_seed: int = 0
    out_dir: str = "results"
    jobs: int = 1
    estimate_bus: int | None = None
    estimate_levels: tuple[int, ...] = (5, 15, 30, 50)
    estimate_days: int = 5

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        kwargs = dict(data)
        for key in ("cases", "voltage_levels", "levels", "models", "estimate_levels"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path: str | Path) -> RunConfig:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)


def validate_config(cfg: RunConfig) -> list[str]:
    problems = []

    def is_int(x: Any) -> bool:
        return isinstance(x, (int, np.integer)) and not isinstance(x, bool)

    if not cfg.levels:
        problems.append("levels must not be empty")
    for lv in cfg.levels:
        if not is_int(lv) or not 1 <= lv <= 100:
            problems.append(f"level {lv!r} outside [1, 100]")
    if len(set(cfg.levels)) != len(cfg.levels):
        problems.append("levels contain duplicates")
    if not is_int(cfg.samplings) or cfg.samplings < 1:
        problems.append("samplings must be >= 1")
    if not is_int(cfg.trees) or cfg.trees < 1:
        problems.append("trees must be >= 1")
    if not is_int(cfg.days) or cfg.days < 1:
        problems.append("days must be >= 1")
    if not is_int(cfg.jobs) or cfg.jobs < 1:
        problems.append("jobs must be >= 1")
    if not is_int(cfg.master_seed) or cfg.master_seed < 0:
        problems.append("master_seed must be a non-negative integer")
    if not is_int(cfg.estimate_days) or cfg.estimate_days < 1:
        problems.append("estimate_days must be >= 1")
    for name, allowed in (("cases", CASES), ("models", MODELS), ("voltage_levels", VOLTAGES)):
        values = getattr(cfg, name)
        if not values:
            problems.append(f"{name} must not be empty")
        bad = [v for v in values if v not in allowed]
        if bad:
            problems.append(f"{name}: {bad} not in {allowed}")
        if len(set(values)) != len(values):
            problems.append(f"{name} contain duplicates")
    if isinstance(cfg.feeder, dict):
        try:
            FeederSpec(**{"seed": 0, **cfg.feeder})
        except TypeError as exc:
            problems.append(f"feeder spec: {exc}")
    elif not isinstance(cfg.feeder, str):
        problems.append("feeder must be a path or a generator spec")
    if isinstance(cfg.profiles, dict):
        unknown = set(cfg.profiles) - {"n_residential", "n_commercial", "seed", "noise"}
        if unknown:
            problems.append(f"profiles spec: unknown keys {sorted(unknown)}")
    elif not isinstance(cfg.profiles, str):
        problems.append("profiles must be a path or a generator spec")
    return problems


# -- inputs --------------------------------------------------------------------


def resolve_feeder(cfg: RunConfig) -> Feeder:
    if isinstance(cfg.feeder, str):
        return load_feeder(cfg.feeder)
    spec = dict(cfg.feeder)
    spec.setdefault("seed", cfg.master_seed)
    if "segment_length_m" in spec:
        spec["segment_length_m"] = tuple(spec["segment_length_m"])
    if "impedance_ohm_per_km" in spec:
        spec["impedance_ohm_per_km"] = {int(k): tuple(v) for k, v in spec["impedance_ohm_per_km"].items()}
    return generate_synthetic_feeder(FeederSpec(**spec))


def resolve_profiles(cfg: RunConfig) -> dict[str, TimeSeries]:
    if isinstance(cfg.profiles, str):
        raw = load_profiles_csv(cfg.profiles)
        return {k: interpolate_to_15min(v) if v.step == 30 else v for k, v in raw.items()}
    spec = dict(cfg.profiles)
    spec.setdefault("seed", cfg.master_seed)
    return generate_synthetic_profiles(days=cfg.days, **spec)


def model_seed(master_seed: int, voltage: int, level: int, sampling: int) -> int:
    """Seed shared by the RF and BRT fits of one scenario."""
    ss = np.random.SeedSequence([master_seed, voltage, level, sampling, 7])
    return int(ss.generate_state(1)[0])


# -- execution -------------------------------------------------------------------


@dataclass(frozen=True)
class _Unit:
    case: str
    voltage: int
    scenario: ObservabilityScenario


def _run_unit(unit: _Unit, vd: VoltageDataset, feeder: Feeder, cfg: RunConfig, estimate_bus: int | None):
    sc = unit.scenario
    train, test = build_tables(vd, sc, feeder, head_fallback=True)
    seed = model_seed(cfg.master_seed, unit.voltage, sc.level_pct, sc.sampling_index)
    rows, predictions = [], {}
    for model in cfg.models:
        if model == "lr":
            fitted = fit_ols(train.X, train.y)
        else:
            q_mode = "third" if model == "rf" else "all"
            fitted = fit_forest(train.X, train.y, ForestConfig(cfg.trees, q_mode, 2, seed))
        if test.n:
            pred = fitted.predict(test.X)
            r, m = rmse(test.y, pred), mae(test.y, pred)
        else:
            pred, r, m = np.empty(0), math.nan, math.nan
        rows.append(ResultRow(unit.case, unit.voltage, model, sc.level_pct, sc.sampling_index, r, m))
        if estimate_bus is not None:
            predictions[model] = pred[test.bus == estimate_bus]
    return rows, predictions


def run_pipeline(cfg: RunConfig) -> list[ResultRow]:
    """Run the whole experiment and write every artifact into ``cfg.out_dir``.

    Output files are a pure function of the inputs and ``master_seed``;
    ``jobs`` only changes wall time.

    Raises:
        ConfigError: if the configuration is invalid.
        PipelineError: on any failure, prefixed with its (case, level,
            sampling) context.
    """
    problems = validate_config(cfg)
    if problems:
        raise ConfigError("; ".join(problems))
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    try:
        feeder = resolve_feeder(cfg)
        profiles = resolve_profiles(cfg)
    except (OSError, ValueError) as exc:
        raise PipelineError(f"inputs: {exc}") from exc
    save_feeder(feeder, out / "feeder.json")

    voltages = [v for v in cfg.voltage_levels if len(feeder.load_buses(v)) >= 2]
    for v in cfg.voltage_levels:
        if v not in voltages:
            log.warning("skipping %d V: fewer than two candidate buses", v)
    scenarios = {}
    for v in voltages:
        scenarios[v] = make_scenarios(feeder.load_buses(v), cfg.master_seed, cfg.levels, cfg.samplings)
        write_manifest(scenarios[v], out / f"scenarios_{v}.csv")

    est_bus = cfg.estimate_bus
    loads = feeder.load_buses()
    if est_bus is None:
        est_bus = max(loads) if loads else None
    elif est_bus not in loads:
        raise ConfigError(f"estimate_bus {est_bus} is not a load bus of the feeder")
    est_voltage = feeder.bus(est_bus).nominal_voltage if est_bus is not None else None
    window = slice(0, min(cfg.estimate_days, cfg.days) * STEPS_PER_DAY)

    all_rows: list[ResultRow] = []
    for case in cfg.cases:
        case_feeder = feeder if case == "pv" else feeder.without_pv()
        if case == "pv" and not feeder.pv_systems:
            log.warning("case 'pv' requested but the feeder has no PV systems")
        log.info("case %s: running QSTS over %d steps", case, cfg.days * STEPS_PER_DAY)
        try:
            vd = run_qsts(case_feeder, profiles, cfg.days)
        except (KeyError, ValueError, RuntimeError) as exc:
            raise PipelineError(f"case={case}: {exc}") from exc
        vd.to_csv(out / f"voltages_{case}.csv")

        units = [_Unit(case, v, sc) for v in voltages for sc in scenarios[v]]

        def work(unit: _Unit):
            want = (
                unit.voltage == est_voltage
                and unit.scenario.sampling_index == 1
                and unit.scenario.level_pct in cfg.estimate_levels
                and est_bus in unit.scenario.unmonitored
            )
            try:
                result = _run_unit(unit, vd, case_feeder, cfg, est_bus if want else None)
            except Exception as exc:
                sc = unit.scenario
                raise PipelineError(
                    f"case={unit.case} voltage={unit.voltage} level={sc.level_pct} "
                    f"sampling={sc.sampling_index}: {exc}"
                ) from exc
            log.info("case %s %d V level %d%% sampling %d done", unit.case, unit.voltage,
                     unit.scenario.level_pct, unit.scenario.sampling_index)
            return result

        if cfg.jobs > 1:
            with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
                results = list(pool.map(work, units))
        else:
            results = [work(u) for u in units]

        for unit, (rows, predictions) in zip(units, results):
            all_rows.extend(rows)
            if predictions:
                name = f"estimates_{case}_{unit.voltage}V_bus{est_bus}_L{unit.scenario.level_pct}.csv"
                export_estimates(out / name, vd.timestamps, vd.row(est_bus), predictions, window)

    export_results(all_rows, out / "results.csv")
    finite = [r for r in all_rows if math.isfinite(r.rmse)]
    lowest = sorted(cfg.levels)[:2]
    export_summary(aggregate(finite), out / "summary.csv", aggregate(finite, exclude_levels=lowest))
    # out_dir and jobs do not influence results, so they stay out of the record
    record = {k: v for k, v in asdict(cfg).items() if k not in ("out_dir", "jobs")}
    (out / "config.json").write_text(json.dumps(record, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return all_rows
