"""Command-line entry point: ``lvestimate [--config PATH] [overrides...]``."""

from __future__ import annotations

import argparse
import logging
import sys

from lvestimate.pipeline import ConfigError, PipelineError, RunConfig, run_pipeline


def _csv_list(kind):
    def parse(text: str):
        try:
            return tuple(kind(x.strip()) for x in text.split(",") if x.strip())
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    return parse


class _Parser(argparse.ArgumentParser):
    # malformed flags are configuration errors, so they share exit code 1
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(
        prog="lvestimate",
        description="Estimate unmonitored LV bus voltages from sparse monitored buses.",
    )
    ap.add_argument("--config", help="JSON file with RunConfig fields")
    ap.add_argument("--feeder", help="feeder JSON file (default: synthetic 50-bus feeder)")
    ap.add_argument("--profiles", help="profiles CSV file (default: synthetic profiles)")
    ap.add_argument("--seed", type=int, dest="master_seed")
    ap.add_argument("--case", choices=("base", "pv", "both"))
    ap.add_argument("--levels", type=_csv_list(int), help="observability levels in percent, e.g. 1,5,50")
    ap.add_argument("--voltage-levels", type=_csv_list(int), dest="voltage_levels", help="subset of 208,480")
    ap.add_argument("--samplings", type=int)
    ap.add_argument("--models", type=_csv_list(str), help="subset of rf,brt,lr")
    ap.add_argument("--trees", type=int)
    ap.add_argument("--days", type=int)
    ap.add_argument("--jobs", type=int)
    ap.add_argument("--out-dir", dest="out_dir")
    ap.add_argument("--estimate-bus", type=int, dest="estimate_bus")
    ap.add_argument("--estimate-levels", type=_csv_list(int), dest="estimate_levels")
    ap.add_argument("--estimate-days", type=int, dest="estimate_days")
    ap.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    for name in ("feeder", "profiles", "master_seed", "levels", "voltage_levels", "samplings", "models",
                 "trees", "days", "jobs", "out_dir", "estimate_bus", "estimate_levels", "estimate_days"):
        value = getattr(args, name)
        if value is not None:
            setattr(cfg, name, value)
    if args.case is not None:
        cfg.cases = ("base", "pv") if args.case == "both" else (args.case,)
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logger = logging.getLogger("lvestimate")
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    logger.addHandler(handler)
    logger.setLevel(logging.WARNING if args.quiet else logging.INFO)
    try:
        cfg = config_from_args(args)
        rows = run_pipeline(cfg)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 1
    except (PipelineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    finally:
        logger.removeHandler(handler)
    print(f"done rows={len(rows)} out={cfg.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
