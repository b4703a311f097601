"""Single-device FC and CONV sweeps: writes sweep CSVs and prints the spill plateaus.

    python3 scripts/reproduce_single_device.py --out results/single
"""

import argparse
from itertools import groupby
from pathlib import Path

from tpuseg.experiments import SWEEP_COLUMNS, ExperimentConfig, cmd_sweep, write_csv
from tpuseg.models import SweepConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results/single"))
    args = ap.parse_args()

    peaks = {}
    for kind, sweep in (("fc", SweepConfig.fc_defaults()), ("conv", SweepConfig.conv_defaults())):
        rows = cmd_sweep(ExperimentConfig(sweep=sweep))
        path = write_csv(args.out / f"sweep_{kind}.csv", SWEEP_COLUMNS, rows)
        peaks[kind] = max(r["gops"] for r in rows)
        print(f"{kind}: {len(rows)} models -> {path}")
        for spill, group in groupby(rows, key=lambda r: r["host_layers"]):
            group = list(group)
            print(
                f"  host_layers={spill}: param {group[0]['param']}..{group[-1]['param']}, "
                f"time {group[0]['time_s'] * 1e3:.3f}..{group[-1]['time_s'] * 1e3:.3f} ms"
            )
    print(f"peak GOPS: fc {peaks['fc']:.2f}, conv {peaks['conv']:.2f} (ratio {peaks['conv'] / peaks['fc']:.1f}x)")


if __name__ == "__main__":
    main()
