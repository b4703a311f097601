"""Segmented pipeline sweeps for both model families at batch 1 and 50.

Runs each partitioner and writes one CSV per (family, partitioner), then prints
the best speedup over a single device for every segment count.

    python3 scripts/reproduce_segmentation.py --out results/segment
"""

import argparse
from dataclasses import replace
from pathlib import Path

from tpuseg.experiments import SEGMENT_COLUMNS, ExperimentConfig, cmd_segment, write_csv
from tpuseg.models import SweepConfig


def summarize(rows, batch):
    best = {}
    for r in rows:
        if r["batch"] == batch:
            best[r["s"]] = max(best.get(r["s"], 0.0), r["speedup_vs_1tpu"])
    return ", ".join(f"s={s}: {v:.2f}x" for s, v in sorted(best.items()))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results/segment"))
    ap.add_argument("--threshold", type=float, default=1e-3, help="max_diff_s for the threshold partitioner")
    args = ap.parse_args()

    for kind, sweep in (("fc", SweepConfig.fc_defaults()), ("conv", SweepConfig.conv_defaults())):
        base = ExperimentConfig(sweep=sweep, max_diff_s=args.threshold)
        for partitioner in ("even", "threshold", "exhaustive"):
            rows = cmd_segment(replace(base, partitioner=partitioner))
            path = write_csv(args.out / f"segment_{kind}_{partitioner}.csv", SEGMENT_COLUMNS, rows)
            print(f"{kind}/{partitioner} -> {path}")
            print(f"  best speedup vs one device, batch 50: {summarize(rows, 50)}")


if __name__ == "__main__":
    main()
