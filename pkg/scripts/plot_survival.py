#!/usr/bin/env python3
"""Log-log plot of a survival curve with its fitted tail line.

    python scripts/plot_survival.py out/disk_rate [more runs...] --save fig.png
"""

import argparse
import json
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("runs", nargs="+", help="output directories of `couple`")
    ap.add_argument("--save", default="survival.png")
    args = ap.parse_args()

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for run in args.runs:
        data = np.genfromtxt(os.path.join(run, "survival.csv"),
                             delimiter=",", names=True)
        with open(os.path.join(run, "summary.json")) as fh:
            summary = json.load(fh)
        label = os.path.basename(run.rstrip("/"))
        mask = data["survival"] > 0
        line, = ax.loglog(data["t"][mask], data["survival"][mask],
                          lw=1.5, label=label)
        ax.fill_between(data["t"][mask], data["ci_lo"][mask],
                        data["ci_hi"][mask], alpha=0.2,
                        color=line.get_color())
        fit = summary.get("fit") or {}
        if fit.get("slope") is not None:
            lo, hi = summary["fit_window"]
            ts = np.geomspace(lo, hi, 50)
            ax.loglog(ts, np.exp(fit["intercept"]) * ts ** fit["slope"],
                      "--", color=line.get_color(), lw=1,
                      label=f"{label}: slope {fit['slope']:.2f}")
    ax.set_xlabel("t")
    ax.set_ylabel("P(coupling time > t)")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.save, dpi=150)
    print(f"wrote {args.save}")


if __name__ == "__main__":
    main()
