#!/usr/bin/env python3
"""Plot time-averaged energy curves from one or more run directories.

    python3 tools/plot_energy.py out/test1 out/test2 out/test3 out/test4 -o energy.png
"""
import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_stats(run_dir):
    with open(Path(run_dir) / "stats.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    t = [float(r["t"]) for r in rows]
    avg = [float(r["time_avg_energy"]) for r in rows]
    return t, avg


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("runs", nargs="+", help="output directories containing stats.csv")
    ap.add_argument("-o", "--output", default="energy.png")
    ap.add_argument("--log", action="store_true", help="logarithmic energy axis")
    args = ap.parse_args()

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for run in args.runs:
        t, avg = read_stats(run)
        ax.plot(t, avg, label=Path(run).name)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\frac{1}{t}\int_0^t E\,ds$")
    if args.log:
        ax.set_yscale("log")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
