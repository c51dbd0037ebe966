#!/usr/bin/env python3
"""Run one coupled-pair experiment from a config in scripts/configs/.

Example:
    python scripts/run_experiment.py scripts/configs/disk_rate.json \
        --out out/disk_rate --threads 8 --pairs 100000
Small --pairs values give quick low-precision previews of the same
scenario; the config defaults reproduce the full experiments.
"""

import argparse
import json
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from knudsen.runner import run_scenario  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config")
    ap.add_argument("--out", default=None)
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--pairs", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()

    with open(args.config) as fh:
        cfg = json.load(fh)
    if args.pairs is not None:
        cfg["n_pairs"] = args.pairs
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = args.out or os.path.join(
        "out", os.path.splitext(os.path.basename(args.config))[0])

    t0 = time.perf_counter()
    summary = run_scenario(cfg, out, threads=args.threads)
    elapsed = time.perf_counter() - t0
    print(json.dumps(summary, indent=2, sort_keys=True))
    print(f"# {summary['n_pairs']} pairs in {elapsed:.1f}s "
          f"({args.threads} workers) -> {out}", file=sys.stderr)


if __name__ == "__main__":
    main()
