"""``tpuseg`` command line: sweep, segment, profile, calibrate, systolic.

Exit codes: 0 success, 1 bad arguments or input, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from . import experiments as ex
from .calibrate import CalibrationError, MeasurementParseError
from .models import ConfigurationError, SweepConfig
from .partition import EnumerationBudgetError
from .systolic import JobError

log = logging.getLogger("tpuseg")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _partitioner(text: str) -> tuple[str, float | None]:
    if text in ("even", "exhaustive"):
        return text, None
    if text.startswith("threshold="):
        try:
            return "threshold", float(text.split("=", 1)[1])
        except ValueError:
            pass
    raise argparse.ArgumentTypeError("expected even, exhaustive or threshold=<seconds>")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config (JSON)")
    common.add_argument("--kind", choices=["FC", "CONV"], help="use the default FC or CONV sweep")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=int, help="random seed (default 0)")
    common.add_argument("--partitioner", type=_partitioner, help="even | threshold=<sec> | exhaustive")
    common.add_argument("--batches", type=_int_list, help="e.g. 1,50")
    common.add_argument("--segments", type=_int_list, help="e.g. 1,2,3,4")
    common.add_argument("--backend", choices=["analytic", "events", "emulated"], help="pipeline backend")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="tpuseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("sweep", parents=[common], help="single-device sweep CSV")
    sub.add_parser("segment", parents=[common], help="segmented pipeline sweep CSV")
    p = sub.add_parser("profile", parents=[common], help="evaluate every partition of one model")
    p.add_argument("model_id")
    p.add_argument("s", type=int)
    p = sub.add_parser("calibrate", parents=[common], help="fit the profile to measured times")
    p.add_argument("measured_csv", type=Path)
    p = sub.add_parser("systolic", parents=[common], help="cycle-level systolic matvec")
    p.add_argument("rows", type=int)
    p.add_argument("cols", type=int)
    p.add_argument("clock_hz", type=float)
    p.add_argument("M", type=int, nargs="?")
    p.add_argument("K", type=int, nargs="?")
    p.add_argument("B", type=int, nargs="?", default=1)
    return parser


def load_config(args) -> ex.ExperimentConfig:
    config = ex.ExperimentConfig.load(args.config) if args.config else ex.ExperimentConfig()
    changes = {}
    if args.kind == "FC":
        changes["sweep"] = SweepConfig.fc_defaults()
    elif args.kind == "CONV":
        changes["sweep"] = SweepConfig.conv_defaults()
    if args.out is not None:
        changes["out_dir"] = str(args.out)
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.partitioner is not None:
        name, max_diff = args.partitioner
        changes["partitioner"] = name
        if max_diff is not None:
            changes["max_diff_s"] = max_diff
    if args.batches is not None:
        changes["batches"] = args.batches
    if args.segments is not None:
        changes["segments"] = args.segments
    if args.backend is not None:
        changes["backend"] = args.backend
    return replace(config, **changes)


def _write_json(path: Path, doc) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def run(args) -> int:
    if args.command == "systolic":
        if min(args.rows, args.cols) < 1 or args.clock_hz <= 0:
            raise UsageError("rows, cols and clock_hz must be positive")
        M = args.M if args.M is not None else args.rows
        K = args.K if args.K is not None else args.cols
        seed = args.seed if args.seed is not None else 0
        doc = ex.cmd_systolic(args.rows, args.cols, args.clock_hz, M, K, args.B, seed)
        print(json.dumps(doc, indent=2))
        return 0

    config = load_config(args)
    out = Path(config.out_dir)
    if args.command == "sweep":
        path = ex.write_csv(out / "sweep.csv", ex.SWEEP_COLUMNS, ex.cmd_sweep(config))
    elif args.command == "segment":
        path = ex.write_csv(out / "segment.csv", ex.SEGMENT_COLUMNS, ex.cmd_segment(config))
    elif args.command == "profile":
        report = ex.cmd_profile(config, args.model_id, args.s)
        path = _write_json(out / f"profile_{args.model_id}_s{args.s}.json", report)
        print(f"best partition: {report['best']} ({len(report['entries'])} evaluated)")
    elif args.command == "calibrate":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = ex.cmd_calibrate(args.measured_csv, config)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        path = _write_json(out / "calibrated_profile.json", result.profile.to_dict())
        print(json.dumps(result.profile.to_dict(), indent=2))
        print(f"loss (sum of squared log error): {result.loss:.6g}")
        print("param,measured_s,predicted_s,log_error")
        for param, measured, predicted, err in result.residuals:
            print(f"{param},{measured!r},{predicted!r},{err!r}")
    else:  # pragma: no cover - argparse restricts the choices
        raise UsageError(f"unknown command {args.command}")
    log.info("wrote %s", path)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return run(args)
    except OSError as exc:
        print(f"tpuseg: I/O error: {exc}", file=sys.stderr)
        return 2
    except (
        UsageError,
        ConfigurationError,
        MeasurementParseError,
        CalibrationError,
        EnumerationBudgetError,
        JobError,
        ValueError,
        TypeError,
        KeyError,
        json.JSONDecodeError,
    ) as exc:
        print(f"tpuseg: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
