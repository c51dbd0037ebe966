"""Command-line front end.

Subcommands:
  couple    simulate a coupled-pair ensemble, write survival.csv,
            summary.json and diagnostics.json
  simulate  single-chain ensembles with stationarity tests
  validate  run the invariant/property suite on a scenario
  patches   search for communicating boundary patches and report them

Every run is a pure function of (config, seed): outputs are byte-stable
across thread counts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .config import build_scenario, load_config, merged_with_defaults
from .errors import KnudsenError
from .geometry import find_patches
from .runner import run_scenario, run_singles
from .stats import (chi2_test, ks_test, position_cell_index,
                    uniform_position_probs)
from . import validate as validate_mod


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="knudsen",
        description="Collisionless-gas Monte Carlo and coupling experiments")
    parser.add_argument("--config", help="path to a scenario JSON file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--pairs", type=int, help="override n_pairs")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--threads", type=int, help="worker process count")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("couple", help="coupled-pair ensemble and rate fit")
    p_sim = sub.add_parser("simulate", help="single-chain ensembles")
    p_sim.add_argument("--times", type=float, nargs="+",
                       default=[1.0, 5.0, 10.0])
    sub.add_parser("validate", help="invariant and property suite")
    sub.add_parser("patches", help="boundary patch search")
    args = parser.parse_args(argv)

    cfg = load_config(args.config) if args.config else {}
    cfg = merged_with_defaults(cfg)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.pairs is not None:
        cfg["n_pairs"] = args.pairs
    if args.out is not None:
        cfg["out"] = args.out
    if args.threads is not None:
        cfg["threads"] = args.threads

    try:
        return _dispatch(args, cfg)
    except KnudsenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args, cfg) -> int:
    out_dir = cfg["out"]
    threads = int(cfg["threads"])
    t0 = time.perf_counter()
    if args.command == "couple":
        summary = run_scenario(cfg, out_dir, threads)
        print(f"couple: {summary['n_pairs']} pairs, censor "
              f"{summary['censor_fraction']:.4f}, slope "
              f"{summary['slope']}, outputs in {out_dir} "
              f"({time.perf_counter() - t0:.1f}s)", file=sys.stderr)
        return 0
    if args.command == "simulate":
        return _simulate(cfg, args.times, out_dir, threads, t0)
    if args.command == "validate":
        scenario = build_scenario(cfg)
        results = validate_mod.run_all(scenario)
        ok = all(r["passed"] for r in results.values())
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "validate.json"), "w") as fh:
            json.dump(results, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"validate: {'all checks passed' if ok else 'FAILURES'} "
              f"({time.perf_counter() - t0:.1f}s)", file=sys.stderr)
        return 0 if ok else 1
    if args.command == "patches":
        scenario = build_scenario(cfg, resolve_patches=False)
        report = find_patches(scenario.domain)
        payload = {"whole_boundary": report.whole_boundary}
        if not report.whole_boundary:
            payload.update({
                "patch_a": {"center": report.patch_a.center.tolist(),
                            "radius": report.patch_a.radius,
                            "metric": report.patch_a.metric},
                "patch_b": {"center": report.patch_b.center.tolist(),
                            "radius": report.patch_b.radius,
                            "metric": report.patch_b.metric},
                "min_distance": report.min_distance,
                "pairs_checked": report.pairs_checked,
            })
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "patches.json"), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(json.dumps(payload, indent=2, sort_keys=True))
        return 0
    raise AssertionError(f"unhandled command {args.command}")


def _simulate(cfg, times, out_dir, threads, t0) -> int:
    scenario, pos, vel, cols = run_singles(cfg, times, threads)
    report = {"n_particles": int(scenario.n_pairs), "times": list(times),
              "mean_collisions": float(cols.mean()), "tests": {}}
    stationary = (scenario.initial.position_kind == "uniform"
                  and scenario.initial.velocity_kind == "equilibrium")
    bins = 10
    if scenario.domain.dim == 2:
        probs = uniform_position_probs(scenario.domain, bins)
    for j, t in enumerate(times):
        speeds = np.sqrt(np.einsum("ij,ij->i", vel[:, j], vel[:, j]))
        entry = {}
        if scenario.domain.dim == 2:
            counts = np.bincount(
                position_cell_index(pos[:, j], scenario.domain, bins),
                minlength=bins * bins)
            entry["position_chi2_p"] = chi2_test(counts, probs)
        entry["speed_ks_p"] = ks_test(
            speeds, scenario.wall_law.equilibrium_speed_cdf)
        report["tests"][f"t={t:g}"] = entry
    report["stationary_initial_condition"] = stationary
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "stationarity.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    worst = min(min(e.values()) for e in report["tests"].values())
    print(f"simulate: {scenario.n_pairs} particles, worst p-value "
          f"{worst:.5f}, outputs in {out_dir} "
          f"({time.perf_counter() - t0:.1f}s)", file=sys.stderr)
    if stationary and worst <= 1e-3:
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
