"""Deterministic parallel execution of pair and single-chain ensembles.

Work is split into fixed-size blocks of pair indices; each pair derives
its own random stream from (seed, pair index), so the ensemble result is
a pure function of (config, seed) no matter how many workers run or how
blocks are scheduled.  Aggregation concatenates per-pair records in index
order; output files carry neither timings nor worker counts.
"""

from __future__ import annotations

import json
import os
from multiprocessing import get_context

import numpy as np

from .config import Scenario, build_scenario
from .coupling import CouplingKernel
from .errors import DegenerateWindow
from .rng import Stream
from .stats import (fit_tail_slope, ks_two_sample, make_grid, survival_curve)
from .transport import InitialLaw

BLOCK = 4096
_AUX_STREAM_BASE = 2**48  # index namespace for non-pair streams

_worker_scenario: Scenario | None = None
_worker_kernel: CouplingKernel | None = None


def make_kernel(scenario: Scenario) -> CouplingKernel:
    return CouplingKernel(
        scenario.transport(), mode=scenario.mode, patch=scenario.patch,
        speed_threshold=scenario.speed_threshold,
        residual_budget=scenario.residual_budget)


def simulate_pair(kernel, scenario, index, snapshot: bool):
    """One coupled pair from its own stream; optional phase snapshot."""
    stream = Stream(scenario.seed, index)
    cs = kernel.new_pair(stream, scenario.initial)
    snap = None
    if snapshot:
        kernel.advance_pair_to(cs, scenario.snapshot_t, stream)
        t_s = scenario.snapshot_t
        snap = (cs.a.position_at(t_s).copy(), cs.a.v.copy(),
                cs.b.position_at(t_s).copy(), cs.b.v.copy())
    res = kernel.run_until_merged(cs, scenario.t_max, stream)
    return res, snap


def _run_block(args):
    lo, hi = args
    sc, kernel = _worker_scenario, _worker_kernel
    n = hi - lo
    tau = np.full(n, np.nan)
    events = np.zeros(n, dtype=np.int64)
    attempts = np.zeros(n, dtype=np.int64)
    successes = np.zeros(n, dtype=np.int64)
    col_a = np.zeros(n, dtype=np.int64)
    col_b = np.zeros(n, dtype=np.int64)
    snaps = []
    for i in range(lo, hi):
        want_snap = i < sc.snapshot_pairs
        try:
            res, snap = simulate_pair(kernel, sc, i, want_snap)
        except Exception as exc:
            raise type(exc)(f"pair {i}: {exc}") from exc
        j = i - lo
        if not res.censored:
            tau[j] = res.tau
        events[j] = res.events
        attempts[j] = res.lambda_attempts
        successes[j] = res.lambda_successes
        col_a[j] = res.collisions_primary
        col_b[j] = res.collisions_stationary
        if snap is not None:
            snaps.append((i, *snap))
    return lo, dict(tau=tau, events=events, attempts=attempts,
                    successes=successes, col_a=col_a, col_b=col_b,
                    snaps=snaps)


def _init_worker(cfg):
    global _worker_scenario, _worker_kernel
    _worker_scenario = _scenario_from_resolved(cfg)
    _worker_kernel = make_kernel(_worker_scenario)


def _scenario_from_resolved(cfg: dict) -> Scenario:
    sc = build_scenario(cfg, resolve_patches=False)
    patch = cfg.get("_resolved_patch")
    if patch is not None:
        from .geometry import BoundaryCap
        sc.patch = BoundaryCap(np.asarray(patch["center"], float),
                               float(patch["radius"]),
                               patch.get("metric", "chordal"))
    return sc


def run_pairs(cfg: dict, threads: int = 1):
    """The full pair ensemble; returns per-pair arrays and snapshots."""
    scenario = build_scenario(cfg)
    resolved = dict(scenario.raw)
    if scenario.patch is not None:
        resolved["_resolved_patch"] = {
            "center": [float(c) for c in scenario.patch.center],
            "radius": float(scenario.patch.radius),
            "metric": scenario.patch.metric}
    blocks = [(lo, min(lo + BLOCK, scenario.n_pairs))
              for lo in range(0, scenario.n_pairs, BLOCK)]
    results = []
    if threads <= 1:
        _init_worker(resolved)
        for b in blocks:
            results.append(_run_block(b))
    else:
        ctx = get_context("fork")
        with ctx.Pool(threads, initializer=_init_worker,
                      initargs=(resolved,)) as pool:
            for out in pool.imap_unordered(_run_block, blocks):
                results.append(out)
    results.sort(key=lambda r: r[0])
    merged = {k: np.concatenate([r[1][k] for r in results])
              for k in ("tau", "events", "attempts", "successes",
                        "col_a", "col_b")}
    snaps = [s for r in results for s in r[1]["snaps"]]
    snaps.sort(key=lambda s: s[0])
    merged["snapshots"] = snaps
    return scenario, merged


def independent_snapshots(scenario: Scenario, count: int, t_snap: float,
                          stationary: bool):
    """Single free-transport chains observed at t_snap (fidelity baseline).

    Streams live in a disjoint index namespace from the pair streams.
    """
    tr = scenario.transport()
    initial = InitialLaw() if stationary else scenario.initial
    base = _AUX_STREAM_BASE + (2**32 if stationary else 0)
    pos = np.empty((count, scenario.domain.dim))
    vel = np.empty((count, scenario.domain.dim))
    for i in range(count):
        stream = Stream(scenario.seed, base + i)
        st = tr.sample_state(stream, initial)
        tr.advance_to(st, t_snap, stream)
        x, v = tr.state_at(st, t_snap)
        pos[i] = x
        vel[i] = v
    return pos, vel


def fidelity_tests(scenario: Scenario, snapshots) -> dict | None:
    """Two-sample KS between coupled-chain marginals and independent chains."""
    k = len(snapshots)
    if k < 1000:
        return None
    xa = np.array([s[1] for s in snapshots])
    va = np.array([s[2] for s in snapshots])
    xb = np.array([s[3] for s in snapshots])
    vb = np.array([s[4] for s in snapshots])
    ia_pos, ia_vel = independent_snapshots(scenario, k, scenario.snapshot_t,
                                           stationary=False)
    ib_pos, ib_vel = independent_snapshots(scenario, k, scenario.snapshot_t,
                                           stationary=True)

    def norms(m):
        return np.sqrt(np.einsum("ij,ij->i", m, m))

    return {
        "primary_speed_p": ks_two_sample(norms(va), norms(ia_vel)),
        "primary_radius_p": ks_two_sample(norms(xa), norms(ia_pos)),
        "stationary_speed_p": ks_two_sample(norms(vb), norms(ib_vel)),
        "stationary_radius_p": ks_two_sample(norms(xb), norms(ib_pos)),
    }


def run_scenario(cfg: dict, out_dir: str, threads: int = 1) -> dict:
    """Simulate, estimate, and write survival.csv / summary.json /
    diagnostics.json; returns the summary dict."""
    scenario, data = run_pairs(cfg, threads)
    tau = data["tau"]
    censored = np.isnan(tau)
    grid = make_grid(scenario.grid_t_min, scenario.t_max,
                     scenario.grid_per_decade)
    curve = survival_curve(np.where(censored, scenario.t_max, tau),
                           censored, grid, scenario.t_max)
    try:
        fit = fit_tail_slope(curve, scenario.fit_window)
        fit_dict = {"slope": fit.slope, "slope_stderr": fit.slope_stderr,
                    "intercept": fit.intercept, "r_squared": fit.r_squared,
                    "n_points": fit.n_points}
    except DegenerateWindow as exc:
        fit_dict = {"slope": None, "error": str(exc)}

    merged_tau = tau[~censored]
    summary = {
        "n_pairs": int(scenario.n_pairs),
        "t_max": scenario.t_max,
        "seed": scenario.seed,
        "mode": scenario.mode,
        "censor_fraction": float(censored.mean()),
        "median_merge_time": float(np.median(merged_tau))
        if len(merged_tau) else None,
        "fit_window": list(scenario.fit_window),
        "fit": fit_dict,
        "slope": fit_dict.get("slope"),
    }
    attempts = int(data["attempts"].sum())
    successes = int(data["successes"].sum())
    diagnostics = {
        "lambda_attempts": attempts,
        "lambda_successes": successes,
        "lambda_success_rate": successes / attempts if attempts else None,
        "mean_events_per_pair": float(data["events"].mean()),
        "mean_collisions_primary": float(data["col_a"].mean()),
        "mean_collisions_stationary": float(data["col_b"].mean()),
        "marginal_fidelity": fidelity_tests(scenario, data["snapshots"]),
        "patch": None if scenario.patch is None else {
            "center": [float(c) for c in scenario.patch.center],
            "radius": float(scenario.patch.radius),
            "min_distance": scenario.patch_min_distance,
        },
    }

    os.makedirs(out_dir, exist_ok=True)
    _write_survival_csv(os.path.join(out_dir, "survival.csv"), curve)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "diagnostics.json"), "w") as fh:
        json.dump(diagnostics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _write_survival_csv(path: str, curve):
    with open(path, "w") as fh:
        fh.write("t,survival,ci_lo,ci_hi\n")
        for t, s, lo, hi in zip(curve.grid, curve.survival,
                                curve.ci_lo, curve.ci_hi):
            fh.write(f"{t:.10g},{s:.10g},{lo:.10g},{hi:.10g}\n")


# ---------------------------------------------------------------------------
# Single-chain ensembles (the `simulate` subcommand).


def _run_single_block(args):
    lo, hi, times = args
    sc = _worker_scenario
    tr = _worker_kernel.transport
    n = hi - lo
    dim = sc.domain.dim
    pos = np.empty((n, len(times), dim))
    vel = np.empty((n, len(times), dim))
    cols = np.zeros(n, dtype=np.int64)
    for i in range(lo, hi):
        stream = Stream(sc.seed, i)
        st = tr.sample_state(stream, sc.initial)
        for j, t in enumerate(times):
            tr.advance_to(st, t, stream)
            x, v = tr.state_at(st, t)
            pos[i - lo, j] = x
            vel[i - lo, j] = v
        cols[i - lo] = st.collisions
    return lo, pos, vel, cols


def run_singles(cfg: dict, times, threads: int = 1):
    """Ensemble of independent chains observed at several times."""
    scenario = build_scenario(cfg)
    resolved = dict(scenario.raw)
    times = list(times)
    blocks = [(lo, min(lo + BLOCK, scenario.n_pairs), times)
              for lo in range(0, scenario.n_pairs, BLOCK)]
    results = []
    if threads <= 1:
        _init_worker(resolved)
        for b in blocks:
            results.append(_run_single_block(b))
    else:
        ctx = get_context("fork")
        with ctx.Pool(threads, initializer=_init_worker,
                      initargs=(resolved,)) as pool:
            for out in pool.imap_unordered(_run_single_block, blocks):
                results.append(out)
    results.sort(key=lambda r: r[0])
    pos = np.concatenate([r[1] for r in results])
    vel = np.concatenate([r[2] for r in results])
    cols = np.concatenate([r[3] for r in results])
    return scenario, pos, vel, cols
