from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import pytest

from lvestimate import cli
from lvestimate.feeder import FeederSpec, generate_synthetic_feeder, save_feeder
from lvestimate.pipeline import (
    ConfigError,
    PipelineError,
    RunConfig,
    model_seed,
    run_pipeline,
    validate_config,
)
from lvestimate.profiles import generate_synthetic_profiles, save_profiles_csv

SMALL = {"feeder": {"n_buses": 10}, "days": 1, "levels": (20, 50), "samplings": 2, "trees": 5}


def tree_digest(root: Path) -> dict[str, str]:
    return {
        p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*")) if p.is_file()
    }


def read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_smallest_run(tmp_path):
    cfg = RunConfig(feeder={"n_buses": 10}, days=1, cases=("base",), levels=(50,), samplings=1,
                    models=("lr",), out_dir=str(tmp_path))
    rows = run_pipeline(cfg)
    data = read_csv(tmp_path / "results.csv")
    assert len(rows) == len(data) == 2
    assert sorted(int(r["voltage"]) for r in data) == [208, 480]


def test_coverage_and_artifacts(tmp_path):
    cfg = RunConfig(**SMALL, out_dir=str(tmp_path), estimate_levels=(50,), estimate_days=1)
    rows = run_pipeline(cfg)
    assert len(rows) == 2 * 2 * 2 * 2 * 3
    keys = {(r.case, r.voltage, r.model, r.level_pct, r.sampling) for r in rows}
    assert len(keys) == len(rows)
    names = {p.name for p in tmp_path.iterdir()}
    assert {"feeder.json", "results.csv", "summary.csv", "config.json", "scenarios_208.csv",
            "scenarios_480.csv", "voltages_base.csv", "voltages_pv.csv"} <= names
    assert len(read_csv(tmp_path / "scenarios_208.csv")) == 4
    for est in tmp_path.glob("estimates_*.csv"):
        assert len(read_csv(est)) == 96
    assert all(r.rmse >= r.mae >= 0 for r in rows)


def test_default_config_counts():
    cfg = RunConfig()
    per_combination = len(cfg.levels) * cfg.samplings * len(cfg.models)
    assert per_combination == 216
    assert validate_config(cfg) == []


@pytest.mark.parametrize(
    "change, needle",
    [
        ({"levels": (0,)}, "level 0"),
        ({"levels": (101,)}, "level 101"),
        ({"samplings": 0}, "samplings"),
        ({"trees": 0}, "trees"),
        ({"models": ("rf", "svm")}, "models"),
        ({"cases": ()}, "cases"),
        ({"voltage_levels": (240,)}, "voltage_levels"),
        ({"feeder": {"n_busses": 3}}, "feeder spec"),
    ],
)
def test_validate_config_violations(change, needle):
    problems = validate_config(RunConfig(**change))
    assert any(needle in p for p in problems), problems


def test_invalid_config_raises(tmp_path):
    with pytest.raises(ConfigError):
        run_pipeline(RunConfig(levels=(0,), out_dir=str(tmp_path)))


def test_unknown_config_key(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"trees": 3, "depth": 4}))
    with pytest.raises(ConfigError, match="depth"):
        RunConfig.from_json(path)


def test_rerun_is_byte_identical(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    run_pipeline(RunConfig(**SMALL, out_dir=str(a)))
    run_pipeline(RunConfig(**SMALL, out_dir=str(b)))
    run_pipeline(RunConfig(**SMALL, out_dir=str(c), jobs=3))
    assert tree_digest(a) == tree_digest(b) == tree_digest(c)


def test_seed_changes_results(tmp_path):
    run_pipeline(RunConfig(**SMALL, out_dir=str(tmp_path / "a")))
    run_pipeline(RunConfig(**SMALL, out_dir=str(tmp_path / "b"), master_seed=1))
    assert (tmp_path / "a" / "results.csv").read_bytes() != (tmp_path / "b" / "results.csv").read_bytes()


def test_model_seed_varies_with_scenario():
    seeds = {model_seed(0, v, lv, s) for v in (208, 480) for lv in (1, 50) for s in (1, 2)}
    assert len(seeds) == 8


def test_file_inputs(tmp_path):
    feeder = generate_synthetic_feeder(FeederSpec(n_buses=8, seed=3))
    save_feeder(feeder, tmp_path / "f.json")
    profiles = generate_synthetic_profiles(days=2)
    # thirty-minute files are downscaled on load; 49 samples give 97 quarter-hour steps
    half_hourly = {k: type(v)(v.start, 30, v.values[:97:2]) for k, v in profiles.items()}
    save_profiles_csv(half_hourly, tmp_path / "p.csv")
    cfg = RunConfig(feeder=str(tmp_path / "f.json"), profiles=str(tmp_path / "p.csv"), days=1,
                    levels=(50,), samplings=1, models=("lr",), out_dir=str(tmp_path / "out"))
    assert run_pipeline(cfg)


def test_runtime_error_carries_context(tmp_path):
    feeder = generate_synthetic_feeder(FeederSpec(n_buses=6, seed=1))
    save_feeder(feeder, tmp_path / "f.json")
    profiles = generate_synthetic_profiles(days=1)
    profiles.pop("res_0")
    profiles.pop("res_1")
    profiles.pop("res_2")
    save_profiles_csv(profiles, tmp_path / "p.csv")
    cfg = RunConfig(feeder=str(tmp_path / "f.json"), profiles=str(tmp_path / "p.csv"), days=1,
                    levels=(50,), samplings=1, out_dir=str(tmp_path / "out"))
    with pytest.raises(PipelineError, match="case=base"):
        run_pipeline(cfg)


def test_estimate_bus_must_be_a_load_bus(tmp_path):
    with pytest.raises(ConfigError, match="estimate_bus"):
        run_pipeline(RunConfig(**SMALL, estimate_bus=0, out_dir=str(tmp_path)))


# -- command line -------------------------------------------------------------------


def test_cli_success(tmp_path, capsys):
    out = tmp_path / "run"
    code = cli.main(["--days", "1", "--levels", "50", "--samplings", "1", "--models", "lr,rf",
                     "--trees", "3", "--case", "pv", "--out-dir", str(out), "--seed", "4"])
    captured = capsys.readouterr()
    assert code == 0
    assert captured.out.strip() == f"done rows=4 out={out}"
    assert "case pv" in captured.err
    saved = json.loads((out / "config.json").read_text())
    assert saved["master_seed"] == 4 and saved["cases"] == ["pv"]


def test_cli_config_file_with_override(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"days": 1, "levels": [50], "samplings": 1, "models": ["lr"],
                                "voltage_levels": [480], "cases": ["base"]}))
    code = cli.main(["--config", str(path), "--samplings", "2", "--out-dir", str(tmp_path / "o"), "-q"])
    captured = capsys.readouterr()
    assert code == 0 and captured.err == ""
    assert captured.out.startswith("done rows=2 ")


def test_cli_validation_error_exit_1(tmp_path, capsys):
    assert cli.main(["--levels", "0", "--out-dir", str(tmp_path)]) == 1
    assert "invalid configuration" in capsys.readouterr().err


def test_cli_missing_config_exit_1(tmp_path):
    assert cli.main(["--config", str(tmp_path / "missing.json")]) == 1


def test_cli_runtime_error_exit_2(tmp_path, capsys):
    (tmp_path / "bad.json").write_text("{}")
    code = cli.main(["--feeder", str(tmp_path / "bad.json"), "--days", "1", "--out-dir", str(tmp_path / "o")])
    assert code == 2
    assert capsys.readouterr().err.startswith("error:")


def test_cli_malformed_flag_exit_1(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["--levels", "five"])
    assert info.value.code == 1
    assert "error" in capsys.readouterr().err
