"""The coupling inequality, empirically: at each time the merge-time tail
must dominate the histogram TV distance between the evolving law and
equilibrium, up to combined statistical error."""

import math

import numpy as np

from knudsen.config import build_scenario
from knudsen.rng import Stream
from knudsen.runner import make_kernel
from knudsen.stats import tv_histogram
from knudsen.transport import InitialLaw


def test_survival_dominates_tv():
    scenario = build_scenario({
        "seed": 61,
        "initial": {"position": {"kind": "ball", "center": [0.4, 0.0],
                                 "radius": 0.3},
                    "velocity": {"kind": "maxwellian", "theta": 0.25}}})
    kernel = make_kernel(scenario)
    times = [2.0, 5.0, 10.0]
    n = 15_000
    dim = scenario.domain.dim
    pos = np.empty((len(times), n, dim))
    vel = np.empty((len(times), n, dim))
    alive = np.zeros((len(times), n), dtype=bool)
    for i in range(n):
        stream = Stream(scenario.seed, i)
        cs = kernel.new_pair(stream, scenario.initial)
        for j, t in enumerate(times):
            kernel.advance_pair_to(cs, t, stream)
            pos[j, i] = cs.a.position_at(t)
            vel[j, i] = cs.a.v
            alive[j, i] = not (cs.merged and cs.merge_time <= t)

    # equilibrium references: mu_inf is stationary, so fresh draws serve
    # at every observation time
    tr = scenario.transport()
    eq = InitialLaw()
    ref_stream = Stream(scenario.seed, 2**40)
    ref_pos = np.empty((2 * n, dim))
    ref_vel = np.empty((2 * n, dim))
    for i in range(2 * n):
        ref_pos[i], ref_vel[i] = eq.sample(ref_stream, scenario.domain,
                                           scenario.wall_law)
    half = n
    binning = (4, 8, 6)
    floor = tv_histogram(ref_pos[:half], ref_vel[:half],
                         ref_pos[half:], ref_vel[half:], binning)
    for j, t in enumerate(times):
        survival = alive[j].mean()
        surv_err = math.sqrt(survival * (1 - survival) / n + 1e-12)
        tv = tv_histogram(pos[j], vel[j], ref_pos[:half], ref_vel[:half],
                          binning)
        assert tv <= survival + 3 * (floor + surv_err), \
            f"t={t}: TV {tv:.4f} exceeds survival {survival:.4f}"
