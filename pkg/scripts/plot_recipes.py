"""Plot recipes for the CSVs written by the other scripts (needs the ``plot`` extra).

    python3 scripts/plot_recipes.py results/single results/segment --out results/figures
"""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def plot_sweep(path, out):
    rows = read(path)
    param = [int(r["param"]) for r in rows]
    fig, (ax_t, ax_g) = plt.subplots(2, 1, sharex=True, figsize=(6, 6))
    ax_t.plot(param, [float(r["time_s"]) * 1e3 for r in rows], marker=".")
    ax_t.set_ylabel("inference time [ms]")
    ax_m = ax_t.twinx()
    ax_m.step(param, [int(r["host_bytes"]) / 2**20 for r in rows], color="tab:red", where="mid")
    ax_m.set_ylabel("host-resident weights [MiB]", color="tab:red")
    ax_g.plot(param, [float(r["gops"]) for r in rows], marker=".")
    ax_g.set_ylabel("GOPS")
    ax_g.set_xlabel("width parameter")
    fig.tight_layout()
    fig.savefig(out / f"{path.stem}.png", dpi=120)
    plt.close(fig)


def plot_segment(path, out):
    rows = read(path)
    fig, axes = plt.subplots(1, 2, sharey=True, figsize=(10, 4))
    for ax, batch in zip(axes, ("1", "50")):
        for s in sorted({r["s"] for r in rows}, key=int):
            sel = [r for r in rows if r["s"] == s and r["batch"] == batch]
            ax.plot([int(r["param"]) for r in sel], [float(r["per_inference_s"]) * 1e3 for r in sel], label=f"{s} devices")
        ax.set_title(f"batch {batch}")
        ax.set_xlabel("width parameter")
    axes[0].set_ylabel("time per inference [ms]")
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(out / f"{path.stem}.png", dpi=120)
    plt.close(fig)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("dirs", nargs="+", type=Path)
    ap.add_argument("--out", type=Path, default=Path("results/figures"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for d in args.dirs:
        for path in sorted(d.glob("sweep*.csv")):
            plot_sweep(path, args.out)
        for path in sorted(d.glob("segment*.csv")):
            plot_segment(path, args.out)
    print(f"figures in {args.out}")


if __name__ == "__main__":
    main()
